#pragma once

// Thin RAII value type over an MPFR number.
//
// Every BigFloat carries its own precision. Newly created values (and the
// results of arithmetic) use the calling thread's working precision, which is
// set with PrecisionScope. Keeping the working precision thread-local lets
// independent trajectories run at different precisions in parallel.

#include <mpfr.h>

#include <compare>
#include <string>

namespace optoent {

/// Working precision (in bits) used for new BigFloat values on this thread.
long working_precision();

/// Sets the working precision for the lifetime of the scope, restoring the
/// previous value on exit.
class PrecisionScope {
 public:
  explicit PrecisionScope(long bits);
  ~PrecisionScope();
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

  /// Raise the working precision of the enclosing scope in place.
  static void raise_to(long bits);

 private:
  long previous_;
};

class BigFloat {
 public:
  BigFloat();
  BigFloat(double v);  // NOLINT: implicit like the built-in floating types
  BigFloat(const BigFloat& other);
  BigFloat(BigFloat&& other) noexcept;
  BigFloat& operator=(const BigFloat& other);
  BigFloat& operator=(BigFloat&& other) noexcept;
  BigFloat& operator=(double v);
  ~BigFloat();

  mpfr_ptr get() { return value_; }
  mpfr_srcptr get() const { return value_; }

  long precision() const { return mpfr_get_prec(value_); }
  /// Change precision keeping the value (rounded if the precision shrinks).
  void set_precision(long bits);

  double to_double() const { return mpfr_get_d(value_, MPFR_RNDN); }
  long double to_long_double() const { return mpfr_get_ld(value_, MPFR_RNDN); }
  /// Value as mantissa * 2^exponent with |mantissa| in [0.5, 1).
  double split(long& exponent) const;
  std::string to_string(int digits = 20) const;

  BigFloat& operator+=(const BigFloat& rhs);
  BigFloat& operator-=(const BigFloat& rhs);
  BigFloat& operator*=(const BigFloat& rhs);
  BigFloat& operator/=(const BigFloat& rhs);
  BigFloat& operator+=(double rhs);
  BigFloat& operator-=(double rhs);
  BigFloat& operator*=(double rhs);
  BigFloat& operator/=(double rhs);

  friend BigFloat operator-(const BigFloat& a);
  friend BigFloat operator+(const BigFloat& a, const BigFloat& b);
  friend BigFloat operator-(const BigFloat& a, const BigFloat& b);
  friend BigFloat operator*(const BigFloat& a, const BigFloat& b);
  friend BigFloat operator/(const BigFloat& a, const BigFloat& b);
  friend BigFloat operator+(const BigFloat& a, double b);
  friend BigFloat operator-(const BigFloat& a, double b);
  friend BigFloat operator*(const BigFloat& a, double b);
  friend BigFloat operator/(const BigFloat& a, double b);
  friend BigFloat operator+(double a, const BigFloat& b);
  friend BigFloat operator-(double a, const BigFloat& b);
  friend BigFloat operator*(double a, const BigFloat& b);
  friend BigFloat operator/(double a, const BigFloat& b);

  friend bool operator==(const BigFloat& a, const BigFloat& b);
  friend std::partial_ordering operator<=>(const BigFloat& a, const BigFloat& b);
  friend bool operator==(const BigFloat& a, double b);
  friend std::partial_ordering operator<=>(const BigFloat& a, double b);

 private:
  mpfr_t value_;
};

BigFloat abs(const BigFloat& x);
BigFloat sqrt(const BigFloat& x);
BigFloat log(const BigFloat& x);
BigFloat exp(const BigFloat& x);
BigFloat ldexp(const BigFloat& x, long e);
bool isfinite(const BigFloat& x);

/// acc += x * c without allocating a temporary (scratch is reused).
void fused_add_scaled(BigFloat& acc, const BigFloat& x, double c, BigFloat& scratch);
/// acc += x * y.
void fused_add_product(BigFloat& acc, const BigFloat& x, const BigFloat& y, BigFloat& scratch);

}  // namespace optoent
