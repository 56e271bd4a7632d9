#include <stdio.h>
#include <string.h>

#include "dsync.h"

int main(int argc, char **argv) {
    if (argc < 2) {
        fprintf(stderr, "usage: smoke <model.json>\n");
        return 2;
    }
    DsyncNet *net = NULL;
    if (dsync_net_load(argv[1], &net) != DSYNC_STATUS_OK) {
        fprintf(stderr, "load: %s\n", dsync_last_error());
        return 1;
    }
    DsyncLog *log = NULL;
    if (dsync_simulate(net, 3, 200, 0.0, &log) != DSYNC_STATUS_OK) {
        fprintf(stderr, "simulate: %s\n", dsync_last_error());
        return 1;
    }
    size_t matched = 0, unmatched = 0;
    if (dsync_check(net, log, &matched, &unmatched) != DSYNC_STATUS_OK || unmatched != 0) {
        fprintf(stderr, "check failed\n");
        return 1;
    }
    char *json = NULL;
    if (dsync_discover(net, log, "[extraction]\ntau_s = 10\n", &json) != DSYNC_STATUS_OK) {
        fprintf(stderr, "discover: %s\n", dsync_last_error());
        return 1;
    }
    int found = strstr(json, "\"constraints\"") != NULL;
    printf("events=%zu matched=%zu report_bytes=%zu\n", dsync_log_len(log), matched, strlen(json));
    dsync_string_free(json);
    dsync_log_free(log);
    dsync_net_free(net);
    return found ? 0 : 1;
}
