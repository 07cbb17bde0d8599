#include "optoent/bigfloat.hpp"

#include <cstdlib>
#include <memory>
#include <utility>

namespace optoent {
namespace {

thread_local long t_working_bits = 256;

// Results of binary operations take the larger of the working precision and
// the operands' precision so that mixing scopes never silently truncates.
long result_bits(mpfr_srcptr a) {
  const long p = mpfr_get_prec(a);
  return p > t_working_bits ? p : t_working_bits;
}

long result_bits(mpfr_srcptr a, mpfr_srcptr b) {
  const long pa = mpfr_get_prec(a);
  const long pb = mpfr_get_prec(b);
  long p = pa > pb ? pa : pb;
  return p > t_working_bits ? p : t_working_bits;
}

}  // namespace

long working_precision() { return t_working_bits; }

PrecisionScope::PrecisionScope(long bits) : previous_(t_working_bits) {
  t_working_bits = bits < MPFR_PREC_MIN ? MPFR_PREC_MIN : bits;
}

PrecisionScope::~PrecisionScope() { t_working_bits = previous_; }

void PrecisionScope::raise_to(long bits) {
  if (bits > t_working_bits) t_working_bits = bits;
}

BigFloat::BigFloat() {
  mpfr_init2(value_, t_working_bits);
  mpfr_set_zero(value_, 1);
}

BigFloat::BigFloat(double v) {
  mpfr_init2(value_, t_working_bits);
  mpfr_set_d(value_, v, MPFR_RNDN);
}

BigFloat::BigFloat(const BigFloat& other) {
  mpfr_init2(value_, mpfr_get_prec(other.value_));
  mpfr_set(value_, other.value_, MPFR_RNDN);
}

BigFloat::BigFloat(BigFloat&& other) noexcept {
  mpfr_init2(value_, MPFR_PREC_MIN);
  mpfr_swap(value_, other.value_);
}

BigFloat& BigFloat::operator=(const BigFloat& other) {
  if (this != &other) {
    if (mpfr_get_prec(value_) != mpfr_get_prec(other.value_)) {
      mpfr_set_prec(value_, mpfr_get_prec(other.value_));
    }
    mpfr_set(value_, other.value_, MPFR_RNDN);
  }
  return *this;
}

BigFloat& BigFloat::operator=(BigFloat&& other) noexcept {
  mpfr_swap(value_, other.value_);
  return *this;
}

BigFloat& BigFloat::operator=(double v) {
  mpfr_set_d(value_, v, MPFR_RNDN);
  return *this;
}

BigFloat::~BigFloat() { mpfr_clear(value_); }

void BigFloat::set_precision(long bits) { mpfr_prec_round(value_, bits, MPFR_RNDN); }

double BigFloat::split(long& exponent) const {
  if (mpfr_zero_p(value_) || !mpfr_number_p(value_)) {
    exponent = 0;
    return mpfr_get_d(value_, MPFR_RNDN);
  }
  return mpfr_get_d_2exp(&exponent, value_, MPFR_RNDN);
}

std::string BigFloat::to_string(int digits) const {
  char* raw = nullptr;
  mpfr_asprintf(&raw, "%.*Rg", digits, value_);
  std::unique_ptr<char, decltype(&mpfr_free_str)> holder(raw, &mpfr_free_str);
  return std::string(raw);
}

#define OPTOENT_COMPOUND(op, fn)                                \
  BigFloat& BigFloat::operator op(const BigFloat& rhs) {        \
    const long p = result_bits(value_, rhs.value_);             \
    if (p > mpfr_get_prec(value_)) set_precision(p);            \
    fn(value_, value_, rhs.value_, MPFR_RNDN);                  \
    return *this;                                               \
  }                                                             \
  BigFloat& BigFloat::operator op(double rhs) {                 \
    const long p = result_bits(value_);                         \
    if (p > mpfr_get_prec(value_)) set_precision(p);            \
    fn##_d(value_, value_, rhs, MPFR_RNDN);                     \
    return *this;                                               \
  }

OPTOENT_COMPOUND(+=, mpfr_add)
OPTOENT_COMPOUND(-=, mpfr_sub)
OPTOENT_COMPOUND(*=, mpfr_mul)
OPTOENT_COMPOUND(/=, mpfr_div)
#undef OPTOENT_COMPOUND

namespace {

BigFloat with_bits(long bits) {
  PrecisionScope scope(bits);
  return BigFloat();
}

}  // namespace

BigFloat operator-(const BigFloat& a) {
  BigFloat r = with_bits(result_bits(a.value_));
  mpfr_neg(r.value_, a.value_, MPFR_RNDN);
  return r;
}

#define OPTOENT_BINARY(op, fn)                                        \
  BigFloat operator op(const BigFloat& a, const BigFloat& b) {        \
    BigFloat r = with_bits(result_bits(a.value_, b.value_));          \
    fn(r.value_, a.value_, b.value_, MPFR_RNDN);                      \
    return r;                                                         \
  }                                                                   \
  BigFloat operator op(const BigFloat& a, double b) {                 \
    BigFloat r = with_bits(result_bits(a.value_));                    \
    fn##_d(r.value_, a.value_, b, MPFR_RNDN);                         \
    return r;                                                         \
  }

OPTOENT_BINARY(+, mpfr_add)
OPTOENT_BINARY(-, mpfr_sub)
OPTOENT_BINARY(*, mpfr_mul)
OPTOENT_BINARY(/, mpfr_div)
#undef OPTOENT_BINARY

BigFloat operator+(double a, const BigFloat& b) { return b + a; }
BigFloat operator*(double a, const BigFloat& b) { return b * a; }

BigFloat operator-(double a, const BigFloat& b) {
  BigFloat r = with_bits(result_bits(b.value_));
  mpfr_d_sub(r.value_, a, b.value_, MPFR_RNDN);
  return r;
}

BigFloat operator/(double a, const BigFloat& b) {
  BigFloat r = with_bits(result_bits(b.value_));
  mpfr_d_div(r.value_, a, b.value_, MPFR_RNDN);
  return r;
}

bool operator==(const BigFloat& a, const BigFloat& b) { return mpfr_equal_p(a.value_, b.value_) != 0; }

std::partial_ordering operator<=>(const BigFloat& a, const BigFloat& b) {
  if (mpfr_unordered_p(a.value_, b.value_)) return std::partial_ordering::unordered;
  const int c = mpfr_cmp(a.value_, b.value_);
  if (c < 0) return std::partial_ordering::less;
  if (c > 0) return std::partial_ordering::greater;
  return std::partial_ordering::equivalent;
}

bool operator==(const BigFloat& a, double b) { return mpfr_cmp_d(a.value_, b) == 0 && !mpfr_nan_p(a.value_); }

std::partial_ordering operator<=>(const BigFloat& a, double b) {
  if (mpfr_nan_p(a.value_) || b != b) return std::partial_ordering::unordered;
  const int c = mpfr_cmp_d(a.value_, b);
  if (c < 0) return std::partial_ordering::less;
  if (c > 0) return std::partial_ordering::greater;
  return std::partial_ordering::equivalent;
}

BigFloat abs(const BigFloat& x) {
  BigFloat r = with_bits(result_bits(x.get()));
  mpfr_abs(r.get(), x.get(), MPFR_RNDN);
  return r;
}

BigFloat sqrt(const BigFloat& x) {
  BigFloat r = with_bits(result_bits(x.get()));
  mpfr_sqrt(r.get(), x.get(), MPFR_RNDN);
  return r;
}

BigFloat log(const BigFloat& x) {
  BigFloat r = with_bits(result_bits(x.get()));
  mpfr_log(r.get(), x.get(), MPFR_RNDN);
  return r;
}

BigFloat exp(const BigFloat& x) {
  BigFloat r = with_bits(result_bits(x.get()));
  mpfr_exp(r.get(), x.get(), MPFR_RNDN);
  return r;
}

BigFloat ldexp(const BigFloat& x, long e) {
  BigFloat r = x;
  if (e >= 0) {
    mpfr_mul_2ui(r.get(), r.get(), static_cast<unsigned long>(e), MPFR_RNDN);
  } else {
    mpfr_div_2ui(r.get(), r.get(), static_cast<unsigned long>(-e), MPFR_RNDN);
  }
  return r;
}

bool isfinite(const BigFloat& x) { return mpfr_number_p(x.get()) != 0; }

void fused_add_scaled(BigFloat& acc, const BigFloat& x, double c, BigFloat& scratch) {
  mpfr_mul_d(scratch.get(), x.get(), c, MPFR_RNDN);
  mpfr_add(acc.get(), acc.get(), scratch.get(), MPFR_RNDN);
}

void fused_add_product(BigFloat& acc, const BigFloat& x, const BigFloat& y, BigFloat& scratch) {
  mpfr_mul(scratch.get(), x.get(), y.get(), MPFR_RNDN);
  mpfr_add(acc.get(), acc.get(), scratch.get(), MPFR_RNDN);
}

}  // namespace optoent
