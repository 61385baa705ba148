#ifndef MATCHCTL_H
#define MATCHCTL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes returned by every function.
 */
typedef enum McStatus {
  MC_STATUS_OK = 0,
  MC_STATUS_NULL_POINTER = 1,
  MC_STATUS_INVALID_ARGUMENT = 2,
  MC_STATUS_INVALID_PARAMETERS = 3,
  MC_STATUS_OUTSIDE_REGION = 4,
  MC_STATUS_DEGENERATE = 5,
  MC_STATUS_NOT_CONTROLLABLE = 6,
  MC_STATUS_NUMERICAL = 7,
  MC_STATUS_IO = 8,
  MC_STATUS_PANIC = 9,
} McStatus;

/*
 Feedback law for cart simulations.
 */
typedef enum McLaw {
  MC_LAW_NONLINEAR = 0,
  MC_LAW_LINEAR = 1,
  MC_LAW_OPEN = 2,
} McLaw;

typedef enum McOutcomeTag {
  MC_OUTCOME_TAG_SETTLED = 0,
  MC_OUTCOME_TAG_DIVERGED = 1,
  MC_OUTCOME_TAG_UNDETERMINED = 2,
} McOutcomeTag;

/*
 Opaque controller handle.
 */
typedef struct McController McController;

/*
 Opaque trajectory handle.
 */
typedef struct McTrajectory McTrajectory;

typedef struct McValidity {
  bool ok;
  double cos2_bound;
  double theta_max;
} McValidity;

/*
 One trajectory sample. `state` is `[θ, x, θ̇, ẋ]` for the cart and
 `[x, y, ẋ, ẏ]` for the quartic system.
 */
typedef struct McSample {
  double t;
  double state[4];
  double u;
  double hhat;
  double dhhat_dt;
} McSample;

/*
 `settle_time` is NaN unless `tag` is settled.
 */
typedef struct McOutcome {
  enum McOutcomeTag tag;
  double settle_time;
  double max_excursion;
} McOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last non-OK status on this thread, or NULL. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *mc_last_error_message(void);

/*
 Scaled coupling `b` of a physical cart (SI units).

 # Safety
 `out_b` must be valid for writes.
 */
enum McStatus mc_nondimensionalize(double base_mass,
                                   double pendulum_mass,
                                   double length,
                                   double inertia,
                                   double gravity,
                                   double *out_b);

/*
 Controller with constant damping gain `phi`.

 # Safety
 `out` must be valid for writes.
 */
enum McStatus mc_controller_new(double b,
                                double sigma0,
                                double mu0,
                                double r,
                                double w1,
                                double phi,
                                struct McController **out);

/*
 Controller with the published constants.

 # Safety
 `out` must be valid for writes.
 */
enum McStatus mc_controller_default(struct McController **out);

/*
 Controller from a JSON parameter document (NUL-terminated UTF-8).

 # Safety
 `json` must be a valid C string and `out` valid for writes.
 */
enum McStatus mc_controller_from_json(const char *json, struct McController **out);

/*
 Releases a controller. NULL is ignored.

 # Safety
 `ctrl` must come from one of the constructors and not be used afterwards.
 */
void mc_controller_free(struct McController *ctrl);

/*
 Control input at `state = [θ, x, θ̇, ẋ]`.

 # Safety
 `state` must point to four doubles; other pointers valid.
 */
enum McStatus mc_controller_control(const struct McController *ctrl,
                                    const double *state,
                                    double *out_u);

/*
 Controlled energy and its predicted rate at `state`.

 # Safety
 `state` must point to four doubles; other pointers valid.
 */
enum McStatus mc_controller_energy(const struct McController *ctrl,
                                   const double *state,
                                   double *out_hhat,
                                   double *out_rate);

/*
 # Safety
 Pointers must be valid.
 */
enum McStatus mc_controller_validity(const struct McController *ctrl, struct McValidity *out);

/*
 Published linear gains `[k_θ, k_x, k_θ̇, k_ẋ]`.

 # Safety
 `out_gains` must point to four writable doubles.
 */
enum McStatus mc_reference_gains(double *out_gains);

/*
 Gains placing the closed-loop poles at `re[i] + i·im[i]`.

 # Safety
 `re`, `im` must point to four doubles, `out_gains` to four writable doubles.
 */
enum McStatus mc_pole_place(double b, const double *re, const double *im, double *out_gains);

/*
 Quartic-example control input at `state = [x, y, ẋ, ẏ]`.

 # Safety
 `state` must point to four doubles, `out_u` valid for writes.
 */
enum McStatus mc_quartic_control(const double *state, double *out_u);

/*
 Integrates the cart under `law`. `gains` (four doubles) is used only by
 the linear law and may be NULL for the published gains. Energy columns
 refer to `ctrl`.

 # Safety
 `ctrl`, `s0` (four doubles) and `out` must be valid; `gains` NULL or four doubles.
 */
enum McStatus mc_simulate_cartpole(const struct McController *ctrl,
                                   enum McLaw law,
                                   const double *gains,
                                   const double *s0,
                                   double dt,
                                   double t_max,
                                   struct McTrajectory **out);

/*
 Integrates the quartic example, with or without its controller.

 # Safety
 `s0` must point to four doubles, `out` valid for writes.
 */
enum McStatus mc_simulate_quartic(bool controlled,
                                  const double *s0,
                                  double dt,
                                  double t_max,
                                  struct McTrajectory **out);

/*
 # Safety
 Pointers must be valid.
 */
enum McStatus mc_trajectory_len(const struct McTrajectory *traj, size_t *out_len);

/*
 # Safety
 Pointers must be valid.
 */
enum McStatus mc_trajectory_sample(const struct McTrajectory *traj,
                                   size_t index,
                                   struct McSample *out);

/*
 Whether integration stopped at the divergence guard.

 # Safety
 Pointers must be valid.
 */
enum McStatus mc_trajectory_diverged(const struct McTrajectory *traj, bool *out);

/*
 Classifies the trajectory with settling band `settle_eps` held for `hold`.

 # Safety
 Pointers must be valid.
 */
enum McStatus mc_trajectory_classify(const struct McTrajectory *traj,
                                     double settle_eps,
                                     double hold,
                                     struct McOutcome *out);

/*
 Releases a trajectory. NULL is ignored.

 # Safety
 `traj` must come from a simulate function and not be used afterwards.
 */
void mc_trajectory_free(struct McTrajectory *traj);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MATCHCTL_H */
