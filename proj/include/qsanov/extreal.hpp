#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

namespace qsanov {

// Extended real line R ∪ {±inf}. Rates and log-masses live here. The two
// indeterminate forms we could ever hit (inf − inf, 0·inf) throw instead of
// silently producing NaN; NaN never enters.
class ExtReal {
public:
    ExtReal() = default;
    ExtReal(double v) : v_(v) {  // implicit on purpose: finite doubles and ±inf are both fine
        if (std::isnan(v)) throw std::domain_error("ExtReal: NaN");
    }

    static ExtReal pos_inf() { return ExtReal(std::numeric_limits<double>::infinity()); }
    static ExtReal neg_inf() { return ExtReal(-std::numeric_limits<double>::infinity()); }

    bool finite() const { return std::isfinite(v_); }
    bool is_pos_inf() const { return std::isinf(v_) && v_ > 0; }
    bool is_neg_inf() const { return std::isinf(v_) && v_ < 0; }

    // Raw double, ±inf allowed.
    double raw() const { return v_; }
    // Value with a finiteness guard, for callers that cannot handle infinities.
    double finite_value() const {
        if (!finite()) throw std::domain_error("ExtReal: infinite value where finite required");
        return v_;
    }

    ExtReal operator-() const { return ExtReal(-v_); }

    friend ExtReal operator+(ExtReal a, ExtReal b) {
        if ((a.is_pos_inf() && b.is_neg_inf()) || (a.is_neg_inf() && b.is_pos_inf()))
            throw std::domain_error("ExtReal: inf - inf");
        return ExtReal(a.v_ + b.v_);
    }
    friend ExtReal operator-(ExtReal a, ExtReal b) { return a + (-b); }
    friend ExtReal operator*(double c, ExtReal a) {
        if (c == 0.0 && !a.finite()) throw std::domain_error("ExtReal: 0 * inf");
        return ExtReal(c * a.v_);
    }

    friend bool operator<(ExtReal a, ExtReal b) { return a.v_ < b.v_; }
    friend bool operator>(ExtReal a, ExtReal b) { return a.v_ > b.v_; }
    friend bool operator<=(ExtReal a, ExtReal b) { return a.v_ <= b.v_; }
    friend bool operator>=(ExtReal a, ExtReal b) { return a.v_ >= b.v_; }
    friend bool operator==(ExtReal a, ExtReal b) { return a.v_ == b.v_; }
    friend bool operator!=(ExtReal a, ExtReal b) { return a.v_ != b.v_; }

    // "+inf"/"-inf" literals, otherwise %.12g — the serialization used in CSV output.
    std::string str() const {
        if (is_pos_inf()) return "+inf";
        if (is_neg_inf()) return "-inf";
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.12g", v_);
        return buf;
    }

private:
    double v_ = 0.0;
};

}  // namespace qsanov
