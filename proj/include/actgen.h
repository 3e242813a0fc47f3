/* actgen — active generation for image classification, C API.
 *
 * The shared library wraps the C++ core behind opaque handles and integer
 * status codes. A session captures one resolved invocation: configuration
 * file, seed, output directory, thread count and optional resume directory.
 * Commands map 1:1 onto the CLI subcommands.
 *
 * Status codes double as process exit codes:
 *   0 ok, 1 usage, 2 configuration, 3 runtime.
 */
#ifndef ACTGEN_H
#define ACTGEN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum actgen_status {
  ACTGEN_OK = 0,
  ACTGEN_ERR_USAGE = 1,
  ACTGEN_ERR_CONFIG = 2,
  ACTGEN_ERR_RUNTIME = 3
} actgen_status;

typedef struct actgen_session actgen_session; /* opaque */

typedef struct actgen_options {
  const char* config_path; /* NULL: built-in defaults */
  const char* out_dir;     /* NULL: ACTGEN_OUT env, else runs/<command> */
  const char* resume_dir;  /* NULL: fresh run */
  uint64_t seed;           /* honored when has_seed != 0, else config value */
  int has_seed;
  int threads; /* <= 0: 1 */
} actgen_options;

/* Creates a session; on failure returns a status and leaves *out NULL
 * (message via actgen_last_error). */
int actgen_session_create(const actgen_options* options, actgen_session** out);
void actgen_session_destroy(actgen_session* s);

/* Resolved configuration echo; returns NULL for unknown keys. The pointer is
 * valid until the next call on the same session. */
const char* actgen_config_value(actgen_session* s, const char* key);

/* Commands. Each writes a manifest plus its outputs under the session's out
 * directory and returns a status code. */
int actgen_make_data(actgen_session* s);
int actgen_train_diffusion(actgen_session* s);
int actgen_train_classifier(actgen_session* s);
int actgen_run_active(actgen_session* s);
/* mode: "real_only" or "random_gen" */
int actgen_run_baseline(actgen_session* s, const char* mode);
int actgen_gen_demo(actgen_session* s);
/* Runs the invariant suite; prints one line per check to stdout. Returns
 * ACTGEN_OK only if every check passes. */
int actgen_verify(actgen_session* s);

/* Message for the most recent failure on this thread ("" if none). */
const char* actgen_last_error(void);

const char* actgen_version(void);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* ACTGEN_H */
