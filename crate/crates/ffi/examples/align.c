#include <stdio.h>
#include "dual_align.h"

int main(void) {
    const double eye[4] = {1.0, 0.0, 0.0, 1.0};
    const double left[2] = {-2.0, 0.0}, right[2] = {2.0, 0.0};
    DaPointSet *a = NULL, *b = NULL;
    DaRun *run = NULL;
    if (da_pointset_gaussian(left, eye, 2, 100, 1, &a) != DA_STATUS_OK ||
        da_pointset_gaussian(right, eye, 2, 100, 2, &b) != DA_STATUS_OK) {
        fprintf(stderr, "%s\n", da_last_error_message());
        return 1;
    }
    DaRunOptions opts = da_run_options_default();
    opts.iterations = 1000;
    if (da_run_alignment(a, b, &opts, &run) != DA_STATUS_OK) {
        fprintf(stderr, "%s\n", da_last_error_message());
        return 1;
    }
    DaTraceRow first, last;
    da_run_trace_row(run, 0, &first);
    da_run_trace_row(run, da_run_trace_len(run) - 1, &last);
    printf("mean gap %.4f -> %.4g, status %d\n", first.mean_gap, last.mean_gap, (int)da_run_status(run));
    da_run_free(run);
    da_pointset_free(a);
    da_pointset_free(b);
    return 0;
}
