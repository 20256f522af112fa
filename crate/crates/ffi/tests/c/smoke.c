#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "scver.h"

static const char *SRC =
    "module M { var a: bool = false; var b: bool = false;\n"
    "  process P { a = true; b = true; assert(a && b); } }\n"
    "instance m: M;\n"
    "invariant never_both { !(m.a && m.b) }\n";

int main(void) {
    ScverDesign *d = NULL;
    if (scver_design_load(SRC, &d) != SCVER_CODE_OK) {
        fprintf(stderr, "load: %s\n", scver_last_error());
        return 10;
    }
    ScverConfig cfg = scver_config_default();
    cfg.max_time = 5;
    char *json = NULL;
    ScverCode c = scver_check(d, "never_both", &cfg, &json);
    if (c != SCVER_CODE_VIOLATION || json == NULL || strstr(json, "InvariantViolation") == NULL) {
        fprintf(stderr, "check returned %d: %s\n", (int)c, scver_last_error());
        return 11;
    }
    scver_string_free(json);
    if (scver_check(d, "missing", &cfg, &json) != SCVER_CODE_INVALID || json != NULL) {
        return 12;
    }
    printf("ok %s\n", scver_version());
    scver_design_free(d);
    return 0;
}
