#pragma once

// Truncated univariate Taylor arithmetic.
//
// Taylor<T, K> holds the coefficients c[0..K] of t -> f(base + t*u); c[k] is
// (1/k!) d^k/dt^k f at t = 0. The coefficient type T may itself be a Taylor
// type, which gives nested (mixed-order) forward differentiation.

#include <array>
#include <cmath>
#include <type_traits>

namespace finsler {

template <class T, int K>
struct Taylor;

template <class T>
struct is_taylor : std::false_type {};
template <class T, int K>
struct is_taylor<Taylor<T, K>> : std::true_type {};

inline double primal(double x) { return x; }

template <class T, int K>
double primal(const Taylor<T, K>& x) {
  return primal(x.c[0]);
}

template <class T, int K>
struct Taylor {
  static_assert(K >= 0);
  static constexpr int order = K;
  using value_type = T;

  std::array<T, K + 1> c{};

  Taylor() = default;
  Taylor(const T& value) { c[0] = value; }  // NOLINT(google-explicit-constructor)
  Taylor(double value)                      // NOLINT(google-explicit-constructor)
    requires(!std::is_same_v<T, double>)
  {
    c[0] = T(value);
  }

  // base + t * direction
  static Taylor variable(const T& base, const T& direction) {
    Taylor r(base);
    if constexpr (K >= 1) r.c[1] = direction;
    return r;
  }

  Taylor& operator+=(const Taylor& o) {
    for (int k = 0; k <= K; ++k) c[k] += o.c[k];
    return *this;
  }
  Taylor& operator-=(const Taylor& o) {
    for (int k = 0; k <= K; ++k) c[k] -= o.c[k];
    return *this;
  }
  Taylor& operator*=(double s) {
    for (int k = 0; k <= K; ++k) c[k] *= s;
    return *this;
  }
  Taylor& operator*=(const Taylor& o) {
    *this = *this * o;
    return *this;
  }
  Taylor& operator/=(const Taylor& o) {
    *this = *this / o;
    return *this;
  }

  Taylor operator-() const {
    Taylor r;
    for (int k = 0; k <= K; ++k) r.c[k] = -c[k];
    return r;
  }

  friend Taylor operator+(Taylor a, const Taylor& b) { return a += b; }
  friend Taylor operator-(Taylor a, const Taylor& b) { return a -= b; }
  friend Taylor operator+(Taylor a, double s) {
    a.c[0] += s;
    return a;
  }
  friend Taylor operator+(double s, Taylor a) {
    a.c[0] += s;
    return a;
  }
  friend Taylor operator-(Taylor a, double s) {
    a.c[0] -= s;
    return a;
  }
  friend Taylor operator-(double s, const Taylor& a) {
    Taylor r = -a;
    r.c[0] += s;
    return r;
  }
  friend Taylor operator*(Taylor a, double s) { return a *= s; }
  friend Taylor operator*(double s, Taylor a) { return a *= s; }
  friend Taylor operator/(Taylor a, double s) { return a *= (1.0 / s); }

  friend Taylor operator*(const Taylor& a, const Taylor& b) {
    Taylor r;
    for (int k = 0; k <= K; ++k) {
      T acc = a.c[0] * b.c[k];
      for (int j = 1; j <= k; ++j) acc += a.c[j] * b.c[k - j];
      r.c[k] = acc;
    }
    return r;
  }

  friend Taylor operator/(const Taylor& a, const Taylor& b) {
    Taylor q;
    const T inv = T(1.0) / b.c[0];
    for (int k = 0; k <= K; ++k) {
      T acc = a.c[k];
      for (int j = 1; j <= k; ++j) acc -= b.c[j] * q.c[k - j];
      q.c[k] = acc * inv;
    }
    return q;
  }

  friend Taylor operator/(double s, const Taylor& b) { return Taylor(T(s)) / b; }
};

namespace taylor_detail {
// Coefficient-level elementary functions; ADL selects the Taylor overloads
// for nested types and std:: for double.
using std::cos;
using std::exp;
using std::log;
using std::pow;
using std::sin;
using std::sqrt;

template <class T>
T call_exp(const T& x) {
  return exp(x);
}
template <class T>
T call_log(const T& x) {
  return log(x);
}
template <class T>
T call_sqrt(const T& x) {
  return sqrt(x);
}
template <class T>
T call_pow(const T& x, double p) {
  return pow(x, p);
}
template <class T>
T call_sin(const T& x) {
  return sin(x);
}
template <class T>
T call_cos(const T& x) {
  return cos(x);
}
}  // namespace taylor_detail

template <class T, int K>
Taylor<T, K> exp(const Taylor<T, K>& a) {
  Taylor<T, K> e;
  e.c[0] = taylor_detail::call_exp(a.c[0]);
  for (int k = 1; k <= K; ++k) {
    T acc = a.c[1] * e.c[k - 1];
    for (int j = 2; j <= k; ++j) acc += double(j) * a.c[j] * e.c[k - j];
    e.c[k] = acc * (1.0 / k);
  }
  return e;
}

template <class T, int K>
Taylor<T, K> log(const Taylor<T, K>& a) {
  Taylor<T, K> l;
  l.c[0] = taylor_detail::call_log(a.c[0]);
  const T inv = T(1.0) / a.c[0];
  for (int k = 1; k <= K; ++k) {
    T acc = a.c[k];
    for (int j = 1; j < k; ++j) acc -= (double(j) / k) * l.c[j] * a.c[k - j];
    l.c[k] = acc * inv;
  }
  return l;
}

template <class T, int K>
Taylor<T, K> sqrt(const Taylor<T, K>& a) {
  Taylor<T, K> s;
  s.c[0] = taylor_detail::call_sqrt(a.c[0]);
  const T inv = T(0.5) / s.c[0];
  for (int k = 1; k <= K; ++k) {
    T acc = a.c[k];
    for (int j = 1; j < k; ++j) acc -= s.c[j] * s.c[k - j];
    s.c[k] = acc * inv;
  }
  return s;
}

// Real power; requires a nonzero constant term.
template <class T, int K>
Taylor<T, K> pow(const Taylor<T, K>& a, double p) {
  Taylor<T, K> y;
  y.c[0] = taylor_detail::call_pow(a.c[0], p);
  const T inv = T(1.0) / a.c[0];
  for (int k = 1; k <= K; ++k) {
    T acc = ((p + 1.0) * 1 - k) / double(k) * a.c[1] * y.c[k - 1];
    for (int j = 2; j <= k; ++j) acc += ((p + 1.0) * j - k) / double(k) * a.c[j] * y.c[k - j];
    y.c[k] = acc * inv;
  }
  return y;
}

template <class T, int K>
void sincos(const Taylor<T, K>& a, Taylor<T, K>& s, Taylor<T, K>& co) {
  s.c[0] = taylor_detail::call_sin(a.c[0]);
  co.c[0] = taylor_detail::call_cos(a.c[0]);
  for (int k = 1; k <= K; ++k) {
    T ss = a.c[1] * co.c[k - 1];
    T cc = a.c[1] * s.c[k - 1];
    for (int j = 2; j <= k; ++j) {
      ss += double(j) * a.c[j] * co.c[k - j];
      cc += double(j) * a.c[j] * s.c[k - j];
    }
    s.c[k] = ss * (1.0 / k);
    co.c[k] = cc * (-1.0 / k);
  }
}

template <class T, int K>
Taylor<T, K> sin(const Taylor<T, K>& a) {
  Taylor<T, K> s, c;
  sincos(a, s, c);
  return s;
}

template <class T, int K>
Taylor<T, K> cos(const Taylor<T, K>& a) {
  Taylor<T, K> s, c;
  sincos(a, s, c);
  return c;
}

// Integer power by repeated squaring; valid for any sign of the base.
template <class S>
S ipow(const S& a, int p) {
  if (p < 0) return S(1.0) / ipow(a, -p);
  S result(1.0);
  S base = a;
  while (p > 0) {
    if (p & 1) result = result * base;
    p >>= 1;
    if (p > 0) base = base * base;
  }
  return result;
}

}  // namespace finsler
