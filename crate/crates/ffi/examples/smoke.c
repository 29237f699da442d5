#include <stdio.h>
#include <string.h>

#include "maids.h"

static int check(MaidsStatus st, const char *what) {
    if (st != MAIDS_STATUS_OK) {
        char buf[256];
        maids_last_error(buf, sizeof buf);
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)st, buf);
        return 1;
    }
    return 0;
}

int main(int argc, char **argv) {
    if (argc < 2) {
        fprintf(stderr, "usage: smoke CONFIG\n");
        return 2;
    }
    double b = 0.0;
    if (check(maids_bound(1, 2, 2, 2, 3, 100, 1, 0.0, 0.0, &b), "bound")) return 1;
    printf("bound %.6f\n", b);

    if (maids_bound(7, 2, 2, 2, 3, 100, 1, 0.0, 0.0, &b) != MAIDS_STATUS_INVALID_ARGUMENT) return 1;

    MaidsConfig *cfg = NULL;
    if (check(maids_config_load(argv[1], &cfg), "config")) return 1;
    if (check(maids_config_set_episodes(cfg, 20), "episodes")) return 1;
    MaidsReport *rep = NULL;
    if (check(maids_run(cfg, &rep), "run")) return 1;
    size_t algs = 0, eps = 0;
    if (check(maids_report_shape(rep, &algs, &eps), "shape")) return 1;
    for (size_t i = 0; i < algs; i++) {
        double mean = 0.0, se = 0.0;
        if (check(maids_report_final_regret(rep, i, &mean, &se), "regret")) return 1;
        printf("algorithm %zu regret %.6f stderr %.6f\n", i, mean, se);
    }
    char *csv = NULL;
    if (check(maids_report_csv(rep, &csv), "csv")) return 1;
    printf("csv bytes %zu\n", strlen(csv));
    maids_string_free(csv);
    maids_report_free(rep);
    maids_config_free(cfg);
    printf("ok %s\n", maids_version());
    return 0;
}
