/* Reconstruct the built-in square through the C API. */
#include <stdio.h>
#include "printleak.h"

#define CHECK(call)                                                       \
  do {                                                                    \
    PlkStatus s_ = (call);                                                \
    if (s_ != PLK_STATUS_OK) {                                            \
      fprintf(stderr, "%s failed (%d): %s\n", #call, (int)s_,             \
              plk_last_error() ? plk_last_error() : "");                  \
      return 1;                                                           \
    }                                                                     \
  } while (0)

int main(void) {
  PlkToolpath *cal = NULL, *square = NULL, *rebuilt = NULL;
  PlkTrace *cal_trace = NULL, *sq_trace = NULL;
  PlkCascade *cascade = NULL;
  double mte = 0.0;

  PlkSimOptions opts = plk_sim_options_default();
  opts.noiseless = true;

  CHECK(plk_toolpath_calibration(4, &cal));
  CHECK(plk_simulate(cal, &opts, &cal_trace));
  CHECK(plk_cascade_train(cal, cal_trace, &opts, 0, &cascade));
  CHECK(plk_toolpath_square(&square));
  CHECK(plk_simulate(square, &opts, &sq_trace));
  CHECK(plk_reconstruct(cascade, sq_trace, square, &rebuilt, &mte));

  printf("printleak %s: %zu segments, MTE %.2f%%\n", plk_version(),
         plk_toolpath_segment_count(rebuilt), mte);

  plk_toolpath_free(rebuilt);
  plk_trace_free(sq_trace);
  plk_toolpath_free(square);
  plk_cascade_free(cascade);
  plk_trace_free(cal_trace);
  plk_toolpath_free(cal);
  return 0;
}
