#ifndef ATTRDBG_H
#define ATTRDBG_H

#include <stdbool.h>
#include <stddef.h>

typedef enum {
  ATTRDBG_STATUS_OK = 0,
  ATTRDBG_STATUS_NULL_ARGUMENT = 1,
  ATTRDBG_STATUS_INVALID_UTF8 = 2,
  ATTRDBG_STATUS_GRAMMAR_ERROR = 3,
  ATTRDBG_STATUS_SENTENCE_ERROR = 4,
  ATTRDBG_STATUS_CIRCULARITY = 5,
  ATTRDBG_STATUS_UNKNOWN_INSTANCE = 6,
  /**
   * The value is undefined because evaluation hit a runtime error.
   */
  ATTRDBG_STATUS_UNDEFINED = 7,
  ATTRDBG_STATUS_SHAPE_MISMATCH = 8,
  ATTRDBG_STATUS_NOTHING_TO_DEBUG = 9,
  ATTRDBG_STATUS_INVALID_ARGUMENT = 10,
  ATTRDBG_STATUS_ABORTED = 11,
  ATTRDBG_STATUS_INTERNAL = 99,
} AttrdbgStatus;

/**
 * A parsed, checked grammar.
 */
typedef struct AttrdbgGrammar AttrdbgGrammar;

/**
 * An evaluated sentence with its computation trace.
 */
typedef struct AttrdbgTrace AttrdbgTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *attrdbg_last_error(void);

/**
 * Static version string.
 */
const char *attrdbg_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void attrdbg_string_free(char *s);

/**
 * Parses grammar source text.
 *
 * # Safety
 * `source` must be a NUL-terminated string; `out` must be writable.
 */
AttrdbgStatus attrdbg_grammar_parse(const char *source, AttrdbgGrammar **out);

/**
 * # Safety
 * `g` must be null or a handle from `attrdbg_grammar_parse`, not yet freed.
 */
void attrdbg_grammar_free(AttrdbgGrammar *g);

/**
 * Number of semantic rules, or 0 for a null handle.
 *
 * # Safety
 * `g` must be null or a live grammar handle.
 */
size_t attrdbg_grammar_rule_count(const AttrdbgGrammar *g);

/**
 * Parses and evaluates a sentence. A runtime fault still yields a trace;
 * check it with `attrdbg_trace_failed`.
 *
 * # Safety
 * `g` must be a live grammar handle, `input` a NUL-terminated string and
 * `out` writable.
 */
AttrdbgStatus attrdbg_eval(const AttrdbgGrammar *g, const char *input, AttrdbgTrace **out);

/**
 * # Safety
 * `t` must be null or a handle from `attrdbg_eval`, not yet freed.
 */
void attrdbg_trace_free(AttrdbgTrace *t);

/**
 * True when evaluation stopped at a runtime error.
 *
 * # Safety
 * `t` must be null or a live trace handle.
 */
bool attrdbg_trace_failed(const AttrdbgTrace *t);

/**
 * Value of an attribute instance such as `B[3].pos`, or a root attribute
 * given by bare name (`val`), rendered as text.
 *
 * # Safety
 * `t` must be a live trace handle, `label` a NUL-terminated string and
 * `out` writable.
 */
AttrdbgStatus attrdbg_trace_value(const AttrdbgTrace *t, const char *label, char **out);

/**
 * The computation trace as JSON lines.
 *
 * # Safety
 * `t` must be a live trace handle and `out` writable.
 */
AttrdbgStatus attrdbg_trace_export(const AttrdbgTrace *t, char **out);

/**
 * Runs a debugging session on `t`, answering every query by comparing with
 * `intended`. `strategy` is "slice", "ad" or "gad". Writes the bug report as
 * JSON to `report_json`. Returns `Aborted` (with the report still written)
 * when the session ended without localizing.
 *
 * # Safety
 * `t` and `intended` must be live handles, `strategy` a NUL-terminated
 * string and `report_json` writable.
 */
AttrdbgStatus attrdbg_debug_reference(const AttrdbgTrace *t,
                                      const AttrdbgGrammar *intended,
                                      const char *strategy,
                                      size_t epsilon,
                                      char **report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ATTRDBG_H */
