#pragma once

#include <gmpxx.h>
#include <cstdint>
#include <iosfwd>
#include <string>

namespace mdpx {

/// Exact rational number. Thin wrapper around GMP's mpq_class that keeps
/// values canonical (lowest terms, positive denominator) after every
/// operation and adds the formatting helpers the report layer needs.
class Rat {
  public:
    Rat() : v_(0) {}
    Rat(long n) : v_(n) {}
    Rat(int n) : v_(static_cast<long>(n)) {}
    Rat(long n, long d);
    Rat(const mpz_class& n, const mpz_class& d);
    explicit Rat(const mpz_class& n) : v_(n) {}
    explicit Rat(const mpq_class& q) : v_(q) { v_.canonicalize(); }

    /// Parses "123" or "-4/7". Throws std::invalid_argument on malformed
    /// input or a zero denominator.
    static Rat fromString(const std::string& s);

    const mpq_class& raw() const { return v_; }
    mpz_class num() const { return v_.get_num(); }
    mpz_class den() const { return v_.get_den(); }

    bool isZero() const { return sgn(v_) == 0; }
    int sign() const { return sgn(v_); }
    bool isInteger() const { return v_.get_den() == 1; }

    Rat operator-() const { return Rat(mpq_class(-v_)); }
    Rat& operator+=(const Rat& o) { v_ += o.v_; return *this; }
    Rat& operator-=(const Rat& o) { v_ -= o.v_; return *this; }
    Rat& operator*=(const Rat& o) { v_ *= o.v_; return *this; }
    Rat& operator/=(const Rat& o);

    friend Rat operator+(Rat a, const Rat& b) { return a += b; }
    friend Rat operator-(Rat a, const Rat& b) { return a -= b; }
    friend Rat operator*(Rat a, const Rat& b) { return a *= b; }
    friend Rat operator/(Rat a, const Rat& b) { return a /= b; }

    friend bool operator==(const Rat& a, const Rat& b) { return a.v_ == b.v_; }
    friend bool operator!=(const Rat& a, const Rat& b) { return a.v_ != b.v_; }
    friend bool operator<(const Rat& a, const Rat& b) { return a.v_ < b.v_; }
    friend bool operator<=(const Rat& a, const Rat& b) { return a.v_ <= b.v_; }
    friend bool operator>(const Rat& a, const Rat& b) { return a.v_ > b.v_; }
    friend bool operator>=(const Rat& a, const Rat& b) { return a.v_ >= b.v_; }

    Rat abs() const { return Rat(mpq_class(::abs(v_))); }
    Rat inv() const;

    /// Largest integer <= value.
    mpz_class floor() const;
    /// Smallest integer >= value.
    mpz_class ceil() const;

    /// Nonnegative integer power.
    Rat pow(unsigned long e) const;

    double toDouble() const { return v_.get_d(); }

    /// "num/den", or just "num" when the denominator is 1.
    std::string toString() const;
    /// Fixed-point decimal rendering with round-half-even at `digits`
    /// fractional digits.
    std::string toDecimalString(int digits) const;

    friend std::ostream& operator<<(std::ostream& os, const Rat& r);

  private:
    mpq_class v_;
};

inline Rat min(const Rat& a, const Rat& b) { return a < b ? a : b; }
inline Rat max(const Rat& a, const Rat& b) { return a < b ? b : a; }

}  // namespace mdpx
