#include "coopmpc/constraint_set.hpp"

#include <cmath>

#include "coopmpc/errors.hpp"

namespace coopmpc {

ConstraintSet::ConstraintSet(Vector lower, Vector upper, std::vector<HalfSpace> half_spaces,
                             Vector interior_point)
    : lower_(std::move(lower)),
      upper_(std::move(upper)),
      half_spaces_(std::move(half_spaces)),
      interior_(std::move(interior_point)) {
  const int n = dim();
  if (upper_.size() != n || interior_.size() != n)
    throw ConfigError("constraint set: dimension mismatch");
  for (int i = 0; i < n; ++i)
    if (!(lower_[i] <= upper_[i])) throw ConfigError("constraint set: empty box interval");
  for (auto& hs : half_spaces_) {
    if (hs.normal.size() != n) throw ConfigError("constraint set: half-space dimension mismatch");
    const double norm = hs.normal.norm();
    if (!(norm > 0.0)) throw ConfigError("constraint set: zero half-space normal");
    hs.normal /= norm;
    hs.offset /= norm;
  }
  if (!(margin(interior_) > 0.0))
    throw ConfigError("constraint set: interior point is not strictly inside");
}

ConstraintSet ConstraintSet::box(Vector lower, Vector upper) {
  Vector mid = 0.5 * (lower + upper);
  return ConstraintSet(std::move(lower), std::move(upper), {}, std::move(mid));
}

double ConstraintSet::margin(const Vector& z) const {
  double m = kInf;
  for (int i = 0; i < dim(); ++i) {
    if (std::isfinite(lower_[i])) m = std::min(m, z[i] - lower_[i]);
    if (std::isfinite(upper_[i])) m = std::min(m, upper_[i] - z[i]);
  }
  for (const auto& hs : half_spaces_) m = std::min(m, hs.offset - hs.normal.dot(z));
  return m;
}

Vector ConstraintSet::clip_to_box(const Vector& z) const {
  return z.cwiseMax(lower_).cwiseMin(upper_);
}

bool check_membership(const ConstraintSet& set, const Vector& z, double tol) {
  if (z.size() != set.dim()) throw ConfigError("check_membership: dimension mismatch");
  return set.margin(z) >= -tol;
}

}  // namespace coopmpc
