// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

// The float filters below assume plain IEEE double evaluation; this file is
// compiled with -ffp-contract=off so the compiler cannot fuse the products.

#include "survscan/predicates.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <cfloat>
#include <cmath>
#include <utility>

namespace survscan::geom {

namespace {

using Rational = boost::multiprecision::cpp_rational;

// Half an ulp of 1.0; the classic error-bound coefficients for the
// straightforward determinant evaluations are expressed in terms of it.
constexpr double kHalfUlp = DBL_EPSILON / 2.0;
constexpr double kOrientBound = (3.0 + 16.0 * kHalfUlp) * kHalfUlp;
constexpr double kIncircleBound = (10.0 + 96.0 * kHalfUlp) * kHalfUlp;

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

int sign_of(const Rational& v) { return v.sign(); }

int exact_orient2d(double ax, double ay, double bx, double by, double cx,
                   double cy) {
  const Rational acx = Rational(ax) - Rational(cx);
  const Rational acy = Rational(ay) - Rational(cy);
  const Rational bcx = Rational(bx) - Rational(cx);
  const Rational bcy = Rational(by) - Rational(cy);
  return sign_of(Rational(acx * bcy - acy * bcx));
}

int exact_incircle(double ax, double ay, double bx, double by, double cx,
                   double cy, double dx, double dy) {
  const Rational adx = Rational(ax) - Rational(dx);
  const Rational ady = Rational(ay) - Rational(dy);
  const Rational bdx = Rational(bx) - Rational(dx);
  const Rational bdy = Rational(by) - Rational(dy);
  const Rational cdx = Rational(cx) - Rational(dx);
  const Rational cdy = Rational(cy) - Rational(dy);
  const Rational alift = adx * adx + ady * ady;
  const Rational blift = bdx * bdx + bdy * bdy;
  const Rational clift = cdx * cdx + cdy * cdy;
  const Rational det = alift * (bdx * cdy - cdx * bdy) +
                       blift * (cdx * ady - adx * cdy) +
                       clift * (adx * bdy - bdx * ady);
  return sign_of(det);
}

}  // namespace

int orient2d(double ax, double ay, double bx, double by, double cx,
             double cy) {
  const double detleft = (ax - cx) * (by - cy);
  const double detright = (ay - cy) * (bx - cx);
  const double det = detleft - detright;

  double detsum = 0.0;
  if (detleft > 0.0) {
    if (detright <= 0.0) return sign_of(det);
    detsum = detleft + detright;
  } else if (detleft < 0.0) {
    if (detright >= 0.0) return sign_of(det);
    detsum = -detleft - detright;
  } else {
    return sign_of(det);  // detleft == 0, so det == -detright exactly
  }
  const double errbound = kOrientBound * detsum;
  if (det >= errbound || -det >= errbound) return sign_of(det);
  return exact_orient2d(ax, ay, bx, by, cx, cy);
}

int incircle(double ax, double ay, double bx, double by, double cx, double cy,
             double dx, double dy) {
  const double adx = ax - dx;
  const double ady = ay - dy;
  const double bdx = bx - dx;
  const double bdy = by - dy;
  const double cdx = cx - dx;
  const double cdy = cy - dy;

  const double bdxcdy = bdx * cdy;
  const double cdxbdy = cdx * bdy;
  const double alift = adx * adx + ady * ady;
  const double cdxady = cdx * ady;
  const double adxcdy = adx * cdy;
  const double blift = bdx * bdx + bdy * bdy;
  const double adxbdy = adx * bdy;
  const double bdxady = bdx * ady;
  const double clift = cdx * cdx + cdy * cdy;

  const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) +
                     clift * (adxbdy - bdxady);
  const double permanent = (std::fabs(bdxcdy) + std::fabs(cdxbdy)) * alift +
                           (std::fabs(cdxady) + std::fabs(adxcdy)) * blift +
                           (std::fabs(adxbdy) + std::fabs(bdxady)) * clift;
  const double errbound = kIncircleBound * permanent;
  if (det > errbound || -det > errbound) return sign_of(det);
  return exact_incircle(ax, ay, bx, by, cx, cy, dx, dy);
}

int incircle_perturbed(double ax, double ay, long ia, double bx, double by,
                       long ib, double cx, double cy, long ic, double dx,
                       double dy, long id) {
  const int unperturbed = incircle(ax, ay, bx, by, cx, cy, dx, dy);
  if (unperturbed != 0) return unperturbed;

  // The perturbation only touches the lift column, and a determinant is
  // linear in each column, so the perturbed value is exactly
  //   -(eps^(ia+1) C_a + eps^(ib+1) C_b + eps^(ic+1) C_c + eps^(id+1) C_d)
  // with C_* the lift-column cofactors. As eps -> 0+ the smallest index
  // dominates, and each cofactor reduces to an orientation of the other
  // three points:
  //   role a: -orient2d(b,c,d)    role b: +orient2d(a,c,d)
  //   role c: -orient2d(a,b,d)    role d: +orient2d(a,b,c)
  struct Term {
    long index;
    int order;  // tie-break so the walk below is deterministic for equal ids
  };
  Term terms[4] = {{ia, 0}, {ib, 1}, {ic, 2}, {id, 3}};
  for (int i = 0; i < 3; ++i)  // tiny fixed-size sort by (index, order)
    for (int j = i + 1; j < 4; ++j)
      if (terms[j].index < terms[i].index ||
          (terms[j].index == terms[i].index &&
           terms[j].order < terms[i].order))
        std::swap(terms[i], terms[j]);

  for (const Term& term : terms) {
    int sign = 0;
    switch (term.order) {
      case 0:
        sign = -orient2d(bx, by, cx, cy, dx, dy);
        break;
      case 1:
        sign = orient2d(ax, ay, cx, cy, dx, dy);
        break;
      case 2:
        sign = -orient2d(ax, ay, bx, by, dx, dy);
        break;
      default:
        sign = orient2d(ax, ay, bx, by, cx, cy);
        break;
    }
    if (sign != 0) return sign;
  }
  return 0;  // all four points collinear: no lift perturbation can resolve it
}

}  // namespace survscan::geom
