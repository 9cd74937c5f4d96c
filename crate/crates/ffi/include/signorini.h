#ifndef SIGNORINI_H
#define SIGNORINI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every entry point.
 */
typedef enum {
  SgOk = 0,
  SgNullPointer = 1,
  SgInvalidArgument = 2,
  SgIoError = 3,
  SgNumericsError = 4,
} SgStatus;

/**
 * Opaque grid-sampled scalar field.
 */
typedef struct SgField SgField;

/**
 * Solver outcome summary.
 */
typedef struct {
  uint64_t iterations;
  double final_update;
  bool converged;
  /**
   * Max of |u * one-sided normal slope| over the contact plane.
   */
  double complementarity;
} SgSolveReport;

/**
 * Outcome of one epiperimetric gain measurement.
 */
typedef struct {
  /**
   * Boundary adjusted energy of the homogeneous datum.
   */
  double g_c;
  /**
   * Boundary adjusted energy of the constrained minimizer.
   */
  double g_v;
  /**
   * 1 - g_v/g_c; meaningful only when `has_kappa` is set.
   */
  double kappa;
  bool has_kappa;
  /**
   * The datum energy sat below the discretization noise floor.
   */
  bool cone_like;
  bool solver_converged;
} SgEpiGain;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent error on this thread. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *sg_last_error_message(void);

/**
 * Sample lambda h_e on a fresh grid; the direction is given by its angle
 * inside the thin plane (n = 2 keeps the sign of the cosine).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
SgStatus sg_field_cone(uint32_t dim,
                       uint32_t resolution,
                       double radius,
                       double lambda,
                       double angle_rad,
                       SgField **out);

/**
 * Sample an even harmonic 2m-homogeneous polynomial given by coefficients
 * over the canonical basis.
 *
 * # Safety
 * `coeffs` must point to `coeff_count` doubles; `out` must be valid.
 */
SgStatus sg_field_poly2m(uint32_t dim,
                         uint32_t resolution,
                         double radius,
                         uint32_t m,
                         const double *coeffs,
                         uintptr_t coeff_count,
                         SgField **out);

/**
 * Read a field from the flat binary format.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `out` a valid pointer.
 */
SgStatus sg_field_read(const char *path, SgField **out);

/**
 * Write a field in the flat binary format (with its JSON sidecar).
 *
 * # Safety
 * `field` must be a live handle, `path` a NUL-terminated string.
 */
SgStatus sg_field_write(const SgField *field, const char *path);

/**
 * Release a field handle.
 *
 * # Safety
 * `field` must be a handle from this library or null (ignored).
 */
void sg_field_free(SgField *field);

/**
 * Grid metadata of a field.
 *
 * # Safety
 * All pointers must be valid.
 */
SgStatus sg_field_info(const SgField *field, uint32_t *dim, uint32_t *resolution, double *radius);

/**
 * Multilinear interpolation at a point (3 doubles; trailing entries of
 * lower-dimensional points are ignored).
 *
 * # Safety
 * `point` must hold 3 doubles; other pointers must be valid.
 */
SgStatus sg_field_eval(const SgField *field, const double *point, double *out);

/**
 * Solve the thin obstacle problem with the handle's samples as the datum.
 * `tol`, `omega` and `max_iters` at zero select the defaults.
 *
 * # Safety
 * `datum` must be a live handle; `solution` and `report` valid pointers.
 */
SgStatus sg_solve(const SgField *datum,
                  double tol,
                  double omega,
                  uint64_t max_iters,
                  SgField **solution,
                  SgSolveReport *report);

/**
 * D(r) = ∫_{B_r(center)} |∇u|^2.
 *
 * # Safety
 * `center` must hold 3 doubles; other pointers must be valid.
 */
SgStatus sg_dirichlet_energy(const SgField *field, const double *center, double r, double *out);

/**
 * H(r) = ∫_{∂B_r(center)} u^2.
 *
 * # Safety
 * As for [`sg_dirichlet_energy`].
 */
SgStatus sg_boundary_mass(const SgField *field, const double *center, double r, double *out);

/**
 * Almgren frequency N(r) = r D(r) / H(r).
 *
 * # Safety
 * As for [`sg_dirichlet_energy`].
 */
SgStatus sg_frequency(const SgField *field, const double *center, double r, double *out);

/**
 * Weiss boundary adjusted energy W_lambda(r).
 *
 * # Safety
 * As for [`sg_dirichlet_energy`].
 */
SgStatus sg_weiss_energy(const SgField *field,
                         const double *center,
                         double r,
                         double lambda,
                         double *out);

/**
 * H1 projection onto the 3/2 blowup cone: amplitude, direction (3 doubles)
 * and distance.
 *
 * # Safety
 * `direction` must hold 3 doubles; other pointers must be valid.
 */
SgStatus sg_cone_fit(const SgField *field, double *lambda, double *direction, double *dist);

/**
 * Epiperimetric gain of a homogeneous datum at the given homogeneity.
 *
 * # Safety
 * `datum` must be a live handle, `out` a valid pointer.
 */
SgStatus sg_epi_gain(const SgField *datum, double lambda_hom, SgEpiGain *out);

/**
 * Contact-set size and free boundary point count of a solved field.
 *
 * # Safety
 * All pointers must be valid.
 */
SgStatus sg_free_boundary_counts(const SgField *field,
                                 double zero_tol,
                                 uint64_t *contact_nodes,
                                 uint64_t *boundary_points);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIGNORINI_H */
