#include <stdio.h>
#include <string.h>
#include "cmdsim.h"

#define CHECK(call) do { CmdsimStatus s_ = (call); if (s_ != CMDSIM_STATUS_OK) { \
    fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, cmdsim_last_error()); return 1; } } while (0)

int main(void) {
    const char *text =
        "W 40 1000 "
        "0000000100000001000000010000000100000001000000010000000100000001\n"
        "R 40 0\n";
    CmdsimTrace *trace = NULL;
    CmdsimConfig *config = NULL;
    CmdsimReport *report = NULL;
    CmdsimCounts counts;
    CHECK(cmdsim_trace_parse(text, &trace));
    CHECK(cmdsim_config_default(&config));
    CHECK(cmdsim_run(trace, config, CMDSIM_MODE_CMD, &report));
    CHECK(cmdsim_report_counts(report, &counts));
    if (counts.l2_hit != 1) {
        fprintf(stderr, "expected one L2 hit, got %llu\n", (unsigned long long)counts.l2_hit);
        return 1;
    }
    if (cmdsim_run(trace, config, 99, &report) != CMDSIM_STATUS_INVALID_ARGUMENT) return 1;
    cmdsim_report_free(report);
    cmdsim_config_free(config);
    cmdsim_trace_free(trace);
    printf("ok %s\n", cmdsim_version());
    return 0;
}
