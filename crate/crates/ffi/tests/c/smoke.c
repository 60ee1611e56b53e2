#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include "attrdbg.h"

static char *slurp(const char *path) {
    FILE *f = fopen(path, "rb");
    if (!f) return NULL;
    fseek(f, 0, SEEK_END);
    long n = ftell(f);
    rewind(f);
    char *buf = malloc(n + 1);
    fread(buf, 1, n, f);
    buf[n] = 0;
    fclose(f);
    return buf;
}

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s (%s)\n", #cond, attrdbg_last_error()); return 1; } } while (0)

int main(int argc, char **argv) {
    CHECK(argc == 3);
    char *buggy_src = slurp(argv[1]), *fixed_src = slurp(argv[2]);
    CHECK(buggy_src && fixed_src);

    AttrdbgGrammar *buggy = NULL, *fixed = NULL;
    CHECK(attrdbg_grammar_parse(buggy_src, &buggy) == ATTRDBG_STATUS_OK);
    CHECK(attrdbg_grammar_parse(fixed_src, &fixed) == ATTRDBG_STATUS_OK);
    CHECK(attrdbg_grammar_rule_count(buggy) == 9);

    AttrdbgTrace *trace = NULL;
    CHECK(attrdbg_eval(buggy, ".2", &trace) == ATTRDBG_STATUS_SENTENCE_ERROR);
    CHECK(trace == NULL);
    CHECK(strstr(attrdbg_last_error(), "offset 1") != NULL);
    CHECK(attrdbg_eval(buggy, ".101", &trace) == ATTRDBG_STATUS_OK);
    CHECK(!attrdbg_trace_failed(trace));

    char *v = NULL;
    CHECK(attrdbg_trace_value(trace, "val", &v) == ATTRDBG_STATUS_OK);
    CHECK(strcmp(v, "3/8") == 0);
    attrdbg_string_free(v);

    char *report = NULL;
    CHECK(attrdbg_debug_reference(trace, fixed, "gad", 1, &report) == ATTRDBG_STATUS_OK);
    CHECK(strstr(report, "\"L#1:B.pos\"") != NULL);
    printf("%s\n", report);
    attrdbg_string_free(report);

    attrdbg_trace_free(trace);
    attrdbg_grammar_free(buggy);
    attrdbg_grammar_free(fixed);
    free(buggy_src);
    free(fixed_src);
    return 0;
}
