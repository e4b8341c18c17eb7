#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pwasvar/model.hpp"

namespace pwasvar {

/// Df_0(z0) = Q' L with Q orthogonal and L lower triangular, diag(L) > 0.
struct RotationNormalization {
  Vector anchor;
  Matrix q;
  Matrix l;
};

struct ReducedForm {
  PwaSvarModel model;  // (Q f_0, Q f_i, Q c)
  RotationNormalization normalization;
};

/// Q' L factorization of a square full-rank matrix with positive diag(L).
RotationNormalization orthogonal_lower_factor(const Matrix& d);

/// Throws BoundaryAnchor when z0 lies on a regime boundary.
ReducedForm orthogonal_reduced_form(const PwaSvarModel& model, const Vector& z0);

/// Premultiplies every map and the intercept by q and conjugates the skedastic
/// variances. Throws NotOrthogonal, or SkedasticNotDiagonalizable when q sigma^2 q'
/// is not diagonal.
PwaSvarModel rotate_model(const PwaSvarModel& model, const Matrix& q);

struct RotationMatch {
  bool equivalent = false;
  Matrix q;
  double residual = 0.0;  // largest relative mismatch on the validation set
};

/// Orthogonal Procrustes fit of f_0^B(x_j) = Q f_0^A(x_j) over the probes, then a check
/// of every map, the intercept and the skedastic variances at fresh points.
/// Throws InsufficientProbes with fewer than p(p+1)/2 probes or a regime left unvisited.
RotationMatch find_rotation(const PwaSvarModel& a, const PwaSvarModel& b, const std::vector<Vector>& probes);

/// Random points with at least p+1 in every regime.
std::vector<Vector> rotation_probes(const PwaSvarModel& model, std::uint64_t seed);

struct InstrumentShock {
  Vector q1;
  Vector shock;     // q1' u_t
  double strength;  // ||delta|| over its jackknife standard error
};

/// q1 = delta / ||delta|| with delta = mean(u_t w_t). Throws WeakInstrument when the
/// jackknife t-ratio of ||delta|| is below 3, InvalidArgument when T < 30.
InstrumentShock instrument_q1(const Matrix& residuals, const Vector& instrument);

struct HeteroClass {
  enum class Kind { NoneExtra, Block, SignedPermutation };
  Kind kind = Kind::NoneExtra;
  std::vector<std::vector<std::size_t>> groups;  // indices equal in every evaluation
};

/// Classifies the rotations compatible with diagonal variances sigma^2 observed at
/// several points (each entry is the diagonal of one evaluation).
HeteroClass hetero_identification_class(const std::vector<Vector>& variances);

/// True iff q diag(variances) q' is diagonal (off-diagonals below 1e-8 max diagonal).
bool is_diagonalizing_rotation(const Matrix& q, const Vector& variances);

/// Rotations and reflections of the plane on an equally spaced angle grid that
/// diagonalize diag(variances).
std::vector<Matrix> admissible_rotations_2d(const Vector& variances, std::size_t angles);

}  // namespace pwasvar
