#ifndef FIBERPINN_H
#define FIBERPINN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  ifdef FIBERPINN_BUILDING
#    define FP_API __declspec(dllexport)
#  else
#    define FP_API __declspec(dllimport)
#  endif
#else
#  define FP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as process exit codes for the command-line tool. */
typedef enum fp_status {
  FP_OK = 0,
  FP_ERR_INTERNAL = 1,
  FP_ERR_CONFIG = 2,  /* bad configuration, invalid argument or input data */
  FP_ERR_NUMERIC = 3, /* non-finite loss or failed numerical step */
  FP_ERR_IO = 4       /* unreadable/unwritable file or malformed input file */
} fp_status;

typedef struct fp_options fp_options;
typedef struct fp_mesh fp_mesh;
typedef struct fp_model fp_model;

FP_API const char* fp_version(void);

/* Message of the last failing call on this thread; "" if none. */
FP_API const char* fp_last_error(void);

/* Run options: config overrides shared by all commands. */
FP_API fp_status fp_options_new(fp_options** out);
FP_API void fp_options_free(fp_options* opts);
/* "section.key=value" */
FP_API fp_status fp_options_set(fp_options* opts, const char* assignment);
FP_API fp_status fp_options_set_seed(fp_options* opts, uint64_t seed);
FP_API fp_status fp_options_set_out(fp_options* opts, const char* dir);
FP_API fp_status fp_options_set_jobs(fp_options* opts, int jobs);

/* Commands. config_path may be NULL for the built-in defaults; opts may be NULL. */
FP_API fp_status fp_generate(const char* config_path, const fp_options* opts);
FP_API fp_status fp_train(const char* config_path, const fp_options* opts);
FP_API fp_status fp_evaluate(const char* config_path, const fp_options* opts);
FP_API fp_status fp_export(const char* config_path, const fp_options* opts);

/* Writes the fully resolved configuration as JSON to a caller buffer.
   *needed receives the required size including the terminating NUL. */
FP_API fp_status fp_resolve_config(const char* config_path, const fp_options* opts, char* buf, size_t cap,
                                   size_t* needed);

/* Meshes. format is "obj", "vtk" or NULL to infer from the extension. */
FP_API fp_status fp_mesh_load(const char* path, const char* format, fp_mesh** out);
FP_API fp_status fp_mesh_sheet(double width_mm, double height_mm, int nx, int ny, fp_mesh** out);
FP_API void fp_mesh_free(fp_mesh* mesh);
FP_API size_t fp_mesh_vertex_count(const fp_mesh* mesh);
FP_API size_t fp_mesh_triangle_count(const fp_mesh* mesh);
FP_API fp_status fp_mesh_mean_edge_length(const fp_mesh* mesh, double* out);

/* Travel times from point sources for a constant conductivity given per
   vertex frame as (d1, d2, d3). seeds: n_seeds vertex indices with times. */
FP_API fp_status fp_mesh_solve_eikonal(const fp_mesh* mesh, const double d[3], const int* seed_vertices,
                                       const double* seed_times, size_t n_seeds, double* phi_out);

/* Trained models. */
FP_API fp_status fp_model_load(const char* path, fp_model** out);
FP_API void fp_model_free(fp_model* model);
/* phi in ms; d (may be NULL) receives the conductivity vector. */
FP_API fp_status fp_model_eval(const fp_model* model, const double xyz[3], double* phi_ms, double d[3]);

#ifdef __cplusplus
}
#endif

#endif
