#include <stdio.h>
#include <string.h>
#include "smd.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s (%s)\n", #cond, smd_last_error()); return 1; } } while (0)

int main(void) {
    SmdInstance *h = NULL;
    CHECK(smd_instance_from_gallery("ex1", &h) == SMD_STATUS_OK);
    bool holds = true;
    int64_t t = 0;
    CHECK(smd_check_nupbr(h, &holds, &t) == SMD_STATUS_OK);
    CHECK(!holds && t == 1);
    smd_instance_free(h);

    CHECK(smd_instance_from_gallery("binomial", &h) == SMD_STATUS_OK);
    SmdKind kind;
    CHECK(smd_classify(h, &kind) == SMD_STATUS_OK && kind == SMD_KIND_SPP);
    bool feasible = false;
    char *delta = NULL;
    CHECK(smd_synth_deflator(h, SMD_MODE_NUPBR, NULL, &feasible, &delta) == SMD_STATUS_OK);
    CHECK(feasible && strcmp(delta, "4/5") == 0);
    smd_string_free(delta);
    CHECK(smd_classify(NULL, &kind) == SMD_STATUS_NULL);
    CHECK(strlen(smd_last_error()) > 0);
    smd_instance_free(h);

    CHECK(smd_instance_from_json("{\"horizon\": 1,", &h) == SMD_STATUS_PARSE);
    CHECK(h == NULL);
    printf("ok\n");
    return 0;
}
