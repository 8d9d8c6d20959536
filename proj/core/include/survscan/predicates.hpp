// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace survscan::geom {

/// Sign of the orientation of (a, b, c): +1 counterclockwise, -1 clockwise,
/// 0 exactly collinear. A floating-point error filter handles the easy cases
/// and the rest falls back to exact rational arithmetic, so the sign is
/// always exact (assuming no overflow/underflow in the inputs).
int orient2d(double ax, double ay, double bx, double by, double cx, double cy);

/// Sign of the incircle test: +1 when d lies strictly inside the circumcircle
/// of the counterclockwise triangle (a, b, c), -1 strictly outside,
/// 0 exactly cocircular. Exact, same scheme as orient2d.
int incircle(double ax, double ay, double bx, double by, double cx, double cy,
             double dx, double dy);

/// incircle with symbolic perturbation: an exact zero is resolved as if point
/// i had its paraboloid lift lowered by eps^(i+1), eps -> 0+. Lower indices
/// get larger perturbations, so fans over cocircular vertex sets attach to
/// the lowest index (a cocircular quad keeps the diagonal through its lowest
/// vertex index). Nonzero whenever (a, b, c) spans a proper triangle; only a
/// fully collinear quadruple (which lift perturbations cannot separate)
/// still yields 0.
int incircle_perturbed(double ax, double ay, long ia, double bx, double by,
                       long ib, double cx, double cy, long ic, double dx,
                       double dy, long id);

}  // namespace survscan::geom
