#include <stdio.h>
#include <string.h>
#include "svdinstn.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        SvdStatus s_ = (call);                                             \
        if (s_ != SVD_STATUS_OK) {                                         \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,              \
                    svd_last_error_message());                             \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    size_t dims[3] = {3, 4, 2};
    double data[24];
    for (int i = 0; i < 24; ++i) {
        int a = i % 3, b = (i / 3) % 4, c = i / 12;
        data[i] = (1.0 + a) * (2.0 + b) * (1.0 + c);
    }
    SvdTensor *x = NULL;
    CHECK(svd_tensor_new(3, dims, data, &x));

    SvdSolverOptions opts = svd_solver_options_default();
    SvdModel *model = NULL;
    char *report = NULL;
    bool converged = false;
    CHECK(svd_decompose(x, &opts, &model, &report, &converged));
    if (strstr(report, "\"relative_error\"") == NULL) {
        return 2;
    }
    size_t ranks[3];
    CHECK(svd_model_ranks(model, ranks, 3));
    printf("ranks %zu %zu %zu converged %d\n", ranks[0], ranks[1], ranks[2], (int)converged);

    SvdTensor *bad = NULL;
    if (svd_tensor_new(3, dims, NULL, &bad) != SVD_STATUS_NULL_POINTER) {
        return 3;
    }
    if (svd_last_error_message() == NULL) {
        return 4;
    }
    svd_string_free(report);
    svd_model_free(model);
    svd_tensor_free(x);
    return 0;
}
