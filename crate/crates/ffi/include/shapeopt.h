#ifndef SHAPEOPT_H
#define SHAPEOPT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum ShapeoptStatus {
  SHAPEOPT_STATUS_OK = 0,
  SHAPEOPT_STATUS_NULL_POINTER = 1,
  SHAPEOPT_STATUS_INVALID_ARGUMENT = 2,
  SHAPEOPT_STATUS_IO = 3,
  SHAPEOPT_STATUS_MESH = 4,
  SHAPEOPT_STATUS_CONFIG = 5,
  SHAPEOPT_STATUS_NUMERICAL = 6,
  // The continuation gave up; a result handle is still returned.
  SHAPEOPT_STATUS_ABORTED = 7,
  SHAPEOPT_STATUS_PANIC = 8,
} ShapeoptStatus;

// A loaded reference mesh.
typedef struct ShapeoptMesh ShapeoptMesh;

// Configuration plus assembled operators.
typedef struct ShapeoptProblem ShapeoptProblem;

// Outcome of an optimization run.
typedef struct ShapeoptResult ShapeoptResult;

// One accepted problem of the continuation.
typedef struct ShapeoptEntry {
  double alpha;
  uint32_t newton_iterations;
  double objective;
  double dissipation;
  double volume_defect;
  double barycenter_defect[2];
  double min_jacobian;
} ShapeoptEntry;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *shapeopt_version(void);

// Message of the last failure on this thread; empty after a success.
// Valid until the next call into the library from the same thread.
const char *shapeopt_last_error(void);

// Default configuration as JSON; release with [`shapeopt_string_free`].
char *shapeopt_default_config_json(void);

// # Safety
// `s` must come from this library or be null.
void shapeopt_string_free(char *s);

// Loads a GMSH file with the default physical tags 1-4 (inflow, outflow,
// wall, design).
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum ShapeoptStatus shapeopt_mesh_load(const char *path, struct ShapeoptMesh **out);

// # Safety
// `mesh` must come from [`shapeopt_mesh_load`] or be null.
void shapeopt_mesh_free(struct ShapeoptMesh *mesh);

// # Safety
// `mesh` must be a live handle; output pointers may be null.
enum ShapeoptStatus shapeopt_mesh_counts(const struct ShapeoptMesh *mesh,
                                         size_t *n_vertices,
                                         size_t *n_triangles,
                                         size_t *n_design_edges);

// Builds a problem from a JSON config file (mesh path inside).
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum ShapeoptStatus shapeopt_problem_from_file(const char *path, struct ShapeoptProblem **out);

// Builds a problem on an already loaded mesh; the config's `mesh` key is
// ignored. `config_json` may be null for defaults.
//
// # Safety
// `mesh` must be a live handle, `config_json` null or NUL-terminated,
// `out` writable.
enum ShapeoptStatus shapeopt_problem_new(const struct ShapeoptMesh *mesh,
                                         const char *config_json,
                                         struct ShapeoptProblem **out);

// # Safety
// `problem` must come from this library or be null.
void shapeopt_problem_free(struct ShapeoptProblem *problem);

// Dissipation of the Stokes flow around the undeformed obstacle.
//
// # Safety
// `problem` must be a live handle and `dissipation` writable.
enum ShapeoptStatus shapeopt_solve_state(const struct ShapeoptProblem *problem,
                                         double *dissipation);

// Largest relative error between the Jacobian and finite differences of
// the residual over the fixed direction set.
//
// # Safety
// `problem` must be a live handle and `max_rel_error` writable.
enum ShapeoptStatus shapeopt_check_derivatives(const struct ShapeoptProblem *problem,
                                               double *max_rel_error);

// Runs the continuation. With a non-null `output_dir` the history, Newton
// log and VTK files are written there. Returns `Aborted` (with `*out`
// set) when the continuation gives up.
//
// # Safety
// `problem` must be a live handle, `output_dir` null or NUL-terminated,
// `out` writable.
enum ShapeoptStatus shapeopt_optimize(const struct ShapeoptProblem *problem,
                                      const char *output_dir,
                                      struct ShapeoptResult **out);

// # Safety
// `result` must come from [`shapeopt_optimize`] or be null.
void shapeopt_result_free(struct ShapeoptResult *result);

// Number of accepted problems; 0 for a null handle.
//
// # Safety
// `result` must be a live handle or null.
size_t shapeopt_result_len(const struct ShapeoptResult *result);

// # Safety
// `result` must be a live handle and `entry` writable.
enum ShapeoptStatus shapeopt_result_entry(const struct ShapeoptResult *result,
                                          size_t index,
                                          struct ShapeoptEntry *entry);

// Copies the final vertex displacements, interleaved `(x, y)`, into
// `buf`. `*needed` receives the required length (`2 * n_vertices`);
// a null `buf` only queries it.
//
// # Safety
// `result` must be a live handle, `needed` writable, and `buf` null or
// valid for `len` doubles.
enum ShapeoptStatus shapeopt_result_displacement(const struct ShapeoptResult *result,
                                                 double *buf,
                                                 size_t len,
                                                 size_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHAPEOPT_H */
