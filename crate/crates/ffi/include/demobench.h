#ifndef DEMOBENCH_H
#define DEMOBENCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. Values match the command-line exit codes
 * where the categories overlap.
 */
typedef enum DbStatus {
  DB_STATUS_OK = 0,
  DB_STATUS_INVALID_ARGUMENT = 1,
  DB_STATUS_CONFIG = 2,
  DB_STATUS_NETWORK = 3,
  DB_STATUS_DATA = 4,
  DB_STATUS_INTERNAL = 5,
  DB_STATUS_PANIC = 6,
} DbStatus;

typedef enum DbFeature {
  DB_FEATURE_TABLE = 0,
  DB_FEATURE_LAPTOP = 1,
  DB_FEATURE_PROXEMICS = 2,
} DbFeature;

/**
 * A running pub/sub hub; freeing it shuts the hub down.
 */
typedef struct DbHub DbHub;

/**
 * A trained feature network.
 */
typedef struct DbNetwork DbNetwork;

/**
 * A parsed robot model.
 */
typedef struct DbRobot DbRobot;

/**
 * A scene (table, laptop, human, obstacles).
 */
typedef struct DbScene DbScene;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread ("" if none). The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *db_last_error(void);

/**
 * Release a string returned by this library. Null is ignored.
 */
void db_string_free(char *s);

/**
 * Parse URDF text. The end effector is the deepest link of the chain.
 */
enum DbStatus db_robot_from_urdf(const char *urdf, struct DbRobot **out);

/**
 * Load a scene file and the robot it references (bundled descriptions are
 * used when the referenced file is absent).
 */
enum DbStatus db_scene_load(const char *path, struct DbScene **scene, struct DbRobot **robot);

/**
 * The bundled UR5e table/laptop/human scene and its robot.
 */
enum DbStatus db_experiment_setup(struct DbScene **scene, struct DbRobot **robot);

void db_robot_free(struct DbRobot *robot);

void db_scene_free(struct DbScene *scene);

/**
 * Number of actuated joints (0 for a null robot).
 */
size_t db_robot_dof(const struct DbRobot *robot);

/**
 * End-effector position in the robot base frame, written to `out[0..3]`.
 */
enum DbStatus db_forward_kinematics(const struct DbRobot *robot,
                                    const double *q,
                                    size_t n,
                                    double *out);

/**
 * 3 × n position Jacobian, row-major, written to `out[0..3n]`.
 */
enum DbStatus db_position_jacobian(const struct DbRobot *robot,
                                   const double *q,
                                   size_t n,
                                   double *out);

/**
 * Damped least-squares IK towards a base-frame `target[3]` from `seed[n]`
 * with default parameters. The solution goes to `q_out[n]`; `converged`
 * and `residual` (metres) may be null.
 */
enum DbStatus db_solve_ik(const struct DbRobot *robot,
                          const double *target,
                          const double *seed,
                          size_t n,
                          double *q_out,
                          bool *converged,
                          double *residual);

/**
 * Ground-truth feature value at a world-frame end-effector position.
 */
enum DbStatus db_ground_truth(const struct DbScene *scene,
                              enum DbFeature feature,
                              const double *ee,
                              double *out);

/**
 * Dimension of the state encoding for `robot`.
 */
size_t db_encoding_dim(const struct DbRobot *robot);

/**
 * State encoding of `q[n]`, written to `out[0..db_encoding_dim(robot)]`.
 */
enum DbStatus db_encode_state(const struct DbRobot *robot,
                              const struct DbScene *scene,
                              const double *q,
                              size_t n,
                              double *out);

enum DbStatus db_network_from_json(const char *json, struct DbNetwork **out);

enum DbStatus db_network_to_json(const struct DbNetwork *net, char **out);

void db_network_free(struct DbNetwork *net);

/**
 * Feature value in (0, 1) of an encoded state `s[n]`.
 */
enum DbStatus db_network_value(const struct DbNetwork *net, const double *s, size_t n, double *out);

/**
 * Train a feature network from `count` demonstration files.
 * `params_json` (TrainParams, missing fields defaulted) may be null.
 */
enum DbStatus db_train_feature(const struct DbRobot *robot,
                               const struct DbScene *scene,
                               const char *const *trace_paths,
                               size_t count,
                               const char *params_json,
                               struct DbNetwork **out);

/**
 * Run a full experiment described by `spec_json` (ExperimentSpec, missing
 * fields defaulted) and return the result as JSON.
 */
enum DbStatus db_run_experiment(const struct DbRobot *robot,
                                const struct DbScene *scene,
                                const char *spec_json,
                                char **out);

/**
 * Start a hub on 127.0.0.1. `tcp_port` 0 picks a free port; `ws_port` 0
 * picks one too, negative disables the websocket listener.
 */
enum DbStatus db_hub_start(uint16_t tcp_port, int32_t ws_port, struct DbHub **out);

/**
 * Port the hub's TCP listener is bound to (0 for a null hub).
 */
uint16_t db_hub_tcp_port(const struct DbHub *hub);

/**
 * Port of the websocket listener, 0 when disabled or for a null hub.
 */
uint16_t db_hub_ws_port(const struct DbHub *hub);

/**
 * Stop the hub and close its connections.
 */
void db_hub_free(struct DbHub *hub);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEMOBENCH_H */
