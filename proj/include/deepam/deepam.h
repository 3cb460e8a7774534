#ifndef DEEPAM_DEEPAM_H
#define DEEPAM_DEEPAM_H

/* C interface to the DeepAM super-resolution library.
 *
 * Every function that can fail returns a deepam_status. On failure a
 * human-readable message is available from deepam_last_error() on the same
 * thread until the next call. Handles are opaque and owned by the caller;
 * release them with the matching *_free function. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(DEEPAM_BUILDING_LIBRARY)
#    define DEEPAM_API __declspec(dllexport)
#  else
#    define DEEPAM_API __declspec(dllimport)
#  endif
#else
#  define DEEPAM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum deepam_status {
  DEEPAM_OK = 0,
  DEEPAM_ERR_CONFIG = 2,   /* invalid arguments or options */
  DEEPAM_ERR_DATA = 3,     /* unreadable, malformed or unsuitable input */
  DEEPAM_ERR_NUMERIC = 4,  /* numerical failure during training or inference */
  DEEPAM_ERR_INTERNAL = 5
} deepam_status;

typedef struct deepam_model deepam_model;
typedef struct deepam_eval_result deepam_eval_result;

typedef void (*deepam_log_fn)(const char* line, void* user);

DEEPAM_API const char* deepam_last_error(void);
DEEPAM_API const char* deepam_version(void);

/* Strings returned through char** parameters. */
DEEPAM_API void deepam_string_free(char* s);

/* ---- models ------------------------------------------------------------ */

typedef struct deepam_model_info {
  int num_layers;
  int patch_size;   /* LR patch side p */
  int scale;        /* upscaling factor s */
  int crop;         /* side of the central HR patch used at inference */
  int stride;       /* default LR sampling step at inference */
  int input_dim;
  int output_dim;
  double training_noise_sigma;
} deepam_model_info;

DEEPAM_API deepam_status deepam_model_load(const char* path, deepam_model** out);
DEEPAM_API deepam_status deepam_model_from_bytes(const uint8_t* data, size_t size, deepam_model** out);
DEEPAM_API deepam_status deepam_model_save(const deepam_model* model, const char* path);
DEEPAM_API void deepam_model_free(deepam_model* model);

DEEPAM_API deepam_status deepam_model_info_get(const deepam_model* model, deepam_model_info* info);
/* layer is 1-based. */
DEEPAM_API deepam_status deepam_model_layer_info(const deepam_model* model, int layer, int* d_in, int* d_out,
                                                 int* d_ipad);

/* x holds n column-major input vectors (input_dim x n); y receives output_dim x n. */
DEEPAM_API deepam_status deepam_model_forward(const deepam_model* model, const double* x, size_t n, double* y);

/* New model with first-layer thresholds adapted to test noise sigma_t. */
DEEPAM_API deepam_status deepam_model_rescale(const deepam_model* model, double sigma_t, deepam_model** out);

/* Writes the equivalent rectifier network (format version 2). */
DEEPAM_API deepam_status deepam_model_export_relu(const deepam_model* model, const char* path);

/* Per-atom normalised inner product between the HR projection of each analysis
 * atom and its synthesis atom. Single-layer models only. Call with values=NULL
 * to query the count. */
DEEPAM_API deepam_status deepam_model_atom_correlation(const deepam_model* model, double* values, int* is_ipad,
                                                       size_t capacity, size_t* count);

/* Dictionary mosaic PNG. layer 1..L renders the effective analysis operator,
 * L+1 the synthesis dictionary. */
DEEPAM_API deepam_status deepam_render_dict(const deepam_model* model, int layer, const char* png_path);

/* ---- training ---------------------------------------------------------- */

typedef struct deepam_train_options {
  const char* arch;          /* "d[:ipad],..."; "0" or "" for a linear model */
  double sigma_n;            /* noise added to LR training images */
  uint64_t seed;
  int patch_size;
  int scale;
  int crop;
  int stride;                /* LR sampling step when extracting training pairs */
  int inference_stride;      /* stored in the model */
  int64_t max_samples;       /* 0 keeps every pair */
  int batch_size;
  int num_batches;
  int iters_per_batch;
  int single_batch_iters;
  double grid_min;
  double grid_max;
  int research_thresholds_per_batch;
  deepam_log_fn log;
  void* log_user;
} deepam_train_options;

/* Fills defaults: 3 x 256 atoms, p=6, s=2, crop=8, full batch schedule. */
DEEPAM_API void deepam_train_options_init(deepam_train_options* options);

/* Trains on every image in dir. report_json may be NULL. */
DEEPAM_API deepam_status deepam_train_from_dir(const char* dir, const deepam_train_options* options,
                                               deepam_model** out, char** report_json);

/* ---- inference --------------------------------------------------------- */

/* Upscales an image file. has_sigma_t selects threshold rescaling; stride 0
 * uses the model's stride. psnr_out (optional) receives the luminance PSNR
 * against reference_path when that is non-NULL. */
DEEPAM_API deepam_status deepam_sr_image(const deepam_model* model, const char* in_path, const char* out_path,
                                         int has_sigma_t, double sigma_t, int stride, const char* reference_path,
                                         double* psnr_out);

/* Trains a throwaway model on the input image alone and upscales it.
 * options->single_batch_iters is the iteration count of that training run. */
DEEPAM_API deepam_status deepam_self_sr_image(const char* in_path, const char* out_path,
                                              const deepam_train_options* options, char** report_json);

/* Luminance PSNR between two image files, with `shave` border pixels ignored. */
DEEPAM_API deepam_status deepam_psnr_files(const char* a_path, const char* b_path, int shave, double* psnr_out);

/* ---- evaluation -------------------------------------------------------- */

typedef enum deepam_eval_mode {
  DEEPAM_EVAL_MODEL = 0,
  DEEPAM_EVAL_BICUBIC = 1,
  DEEPAM_EVAL_SELF = 2
} deepam_eval_mode;

typedef struct deepam_eval_options {
  deepam_eval_mode mode;
  int has_sigma_t;           /* add N(0, sigma_t^2) noise to the LR inputs */
  double sigma_t;
  int rescale_thresholds;    /* adapt a noisy-trained model to sigma_t */
  uint64_t seed;
  int shave;
  int stride;
  int scale;                 /* used when no model is given */
  const char* output_dir;    /* NULL: do not write outputs */
  const deepam_train_options* self_options;  /* DEEPAM_EVAL_SELF */
  deepam_log_fn log;
  void* log_user;
} deepam_eval_options;

DEEPAM_API void deepam_eval_options_init(deepam_eval_options* options);

/* model may be NULL for the bicubic and self-example modes. */
DEEPAM_API deepam_status deepam_eval_dir(const char* dir, const deepam_model* model,
                                         const deepam_eval_options* options, deepam_eval_result** out);
DEEPAM_API size_t deepam_eval_count(const deepam_eval_result* result);
DEEPAM_API deepam_status deepam_eval_row(const deepam_eval_result* result, size_t index, const char** name,
                                         double* psnr, double* bicubic_psnr);
DEEPAM_API void deepam_eval_mean(const deepam_eval_result* result, double* psnr, double* bicubic_psnr);
/* Table as CSV (csv != 0) or aligned text. Owned by the result. */
DEEPAM_API const char* deepam_eval_format(const deepam_eval_result* result, int csv);
DEEPAM_API void deepam_eval_free(deepam_eval_result* result);

#ifdef __cplusplus
}
#endif

#endif /* DEEPAM_DEEPAM_H */
