#pragma once

#include <cmath>
#include <ostream>

namespace fastflux {

/// Extended real in [0, +inf] for cost values. +infinity is an explicit state,
/// not a sentinel double, and is absorbing under addition and scaling.
class ExtReal {
  public:
    ExtReal() = default;
    static ExtReal of(double v) { return ExtReal(v, true); }
    static ExtReal infinity() { return ExtReal(0.0, false); }

    bool finite() const { return finite_; }
    /// Finite value; only meaningful when finite().
    double value() const { return value_; }
    /// Collapses to a plain double, mapping infinity to HUGE_VAL.
    double as_double() const { return finite_ ? value_ : HUGE_VAL; }

    ExtReal& operator+=(const ExtReal& o) {
        if (!o.finite_) finite_ = false;
        if (finite_) value_ += o.value_;
        return *this;
    }
    ExtReal& operator+=(double v) { return *this += of(v); }

    friend ExtReal operator+(ExtReal a, const ExtReal& b) { return a += b; }
    friend ExtReal operator+(ExtReal a, double b) { return a += b; }
    friend ExtReal operator*(double c, const ExtReal& a) {
        return a.finite_ ? of(c * a.value_) : infinity();
    }
    friend bool operator==(const ExtReal& a, const ExtReal& b) {
        return a.finite_ == b.finite_ && (!a.finite_ || a.value_ == b.value_);
    }
    friend std::ostream& operator<<(std::ostream& os, const ExtReal& a) {
        return a.finite_ ? (os << a.value_) : (os << "inf");
    }

  private:
    ExtReal(double v, bool f) : value_(v), finite_(f) {}
    double value_ = 0.0;
    bool finite_ = true;
};

}  // namespace fastflux
