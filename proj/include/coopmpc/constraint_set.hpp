#pragma once

#include <limits>
#include <vector>

#include "coopmpc/types.hpp"

namespace coopmpc {

// a·z <= b with ‖a‖ = 1 (normalized at construction so tolerances are distances)
struct HalfSpace {
  Vector normal;
  double offset = 0.0;
};

// box ∩ half-spaces; a strictly interior point is stored as the nonemptiness witness
class ConstraintSet {
 public:
  ConstraintSet() = default;  // dimension-0 placeholder
  ConstraintSet(Vector lower, Vector upper, std::vector<HalfSpace> half_spaces,
                Vector interior_point);

  // bounded box, witness = midpoint
  static ConstraintSet box(Vector lower, Vector upper);

  int dim() const { return static_cast<int>(lower_.size()); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  const std::vector<HalfSpace>& half_spaces() const { return half_spaces_; }
  const Vector& interior_point() const { return interior_; }
  bool is_box() const { return half_spaces_.empty(); }

  // smallest slack over all constraints (negative outside, +inf if unconstrained)
  double margin(const Vector& z) const;

  Vector clip_to_box(const Vector& z) const;

 private:
  Vector lower_, upper_;
  std::vector<HalfSpace> half_spaces_;
  Vector interior_;
};

bool check_membership(const ConstraintSet& set, const Vector& z, double tol);

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace coopmpc
