#include "mdpx/rational.hpp"

#include <ostream>
#include <stdexcept>

namespace mdpx {

Rat::Rat(long n, long d) {
    if (d == 0) throw std::invalid_argument("rational with zero denominator");
    v_ = mpq_class(n, d);
    v_.canonicalize();
}

Rat::Rat(const mpz_class& n, const mpz_class& d) {
    if (d == 0) throw std::invalid_argument("rational with zero denominator");
    v_ = mpq_class(n) / mpq_class(d);
    v_.canonicalize();
}

Rat Rat::fromString(const std::string& s) {
    auto slash = s.find('/');
    try {
        if (slash == std::string::npos) {
            return Rat(mpz_class(s));
        }
        mpz_class n(s.substr(0, slash));
        mpz_class d(s.substr(slash + 1));
        if (d == 0) throw std::invalid_argument("zero denominator");
        return Rat(n, d);
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument("malformed rational '" + s + "'");
    }
}

Rat& Rat::operator/=(const Rat& o) {
    if (o.isZero()) throw std::domain_error("rational division by zero");
    v_ /= o.v_;
    return *this;
}

Rat Rat::inv() const {
    if (isZero()) throw std::domain_error("inverse of zero");
    return Rat(mpq_class(1) / v_);
}

mpz_class Rat::floor() const {
    mpz_class q;
    mpz_fdiv_q(q.get_mpz_t(), v_.get_num_mpz_t(), v_.get_den_mpz_t());
    return q;
}

mpz_class Rat::ceil() const {
    mpz_class q;
    mpz_cdiv_q(q.get_mpz_t(), v_.get_num_mpz_t(), v_.get_den_mpz_t());
    return q;
}

Rat Rat::pow(unsigned long e) const {
    mpz_class n, d;
    mpz_pow_ui(n.get_mpz_t(), v_.get_num_mpz_t(), e);
    mpz_pow_ui(d.get_mpz_t(), v_.get_den_mpz_t(), e);
    Rat r;
    r.v_ = mpq_class(n) / mpq_class(d);
    r.v_.canonicalize();
    return r;
}

std::string Rat::toString() const {
    if (v_.get_den() == 1) return v_.get_num().get_str();
    return v_.get_num().get_str() + "/" + v_.get_den().get_str();
}

std::string Rat::toDecimalString(int digits) const {
    if (digits < 0) digits = 0;
    mpz_class n = v_.get_num();
    mpz_class d = v_.get_den();
    bool neg = n < 0;
    if (neg) n = -n;

    mpz_class scale;
    mpz_ui_pow_ui(scale.get_mpz_t(), 10, static_cast<unsigned long>(digits));
    // round(n*scale/d) half-to-even
    mpz_class t = n * scale;
    mpz_class q, r;
    mpz_fdiv_qr(q.get_mpz_t(), r.get_mpz_t(), t.get_mpz_t(), d.get_mpz_t());
    mpz_class twice = 2 * r;
    if (twice > d || (twice == d && mpz_odd_p(q.get_mpz_t()))) q += 1;

    std::string s = q.get_str();
    std::string out;
    if (digits == 0) {
        out = s;
    } else {
        if (static_cast<int>(s.size()) <= digits) s.insert(0, digits + 1 - s.size(), '0');
        out = s.substr(0, s.size() - digits) + "." + s.substr(s.size() - digits);
    }
    if (neg && q != 0) out.insert(0, 1, '-');
    return out;
}

std::ostream& operator<<(std::ostream& os, const Rat& r) { return os << r.toString(); }

}  // namespace mdpx
