#ifndef KWICK_H
#define KWICK_H

/* Generated by cbindgen from crates/kwick-ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KwStatus {
  KW_STATUS_OK = 0,
  KW_STATUS_NULL_POINTER = 1,
  KW_STATUS_INVALID_UTF8 = 2,
  KW_STATUS_SYNTAX = 3,
  KW_STATUS_INVARIANT = 4,
  KW_STATUS_UNKNOWN_LABEL = 5,
  KW_STATUS_DIMENSION_CAP = 6,
  KW_STATUS_EQUAL_TIME_TIE = 7,
  KW_STATUS_VERIFICATION_FAILED = 8,
  KW_STATUS_PANIC = 9,
  KW_STATUS_OTHER = 10,
} KwStatus;

/**
 * Grassmann polynomial.
 */
typedef struct KwGrassmann KwGrassmann;

/**
 * Parsed spec file.
 */
typedef struct KwSpec KwSpec;

typedef struct KwComplex {
  double re;
  double im;
} KwComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string.
 */
const char *kw_version(void);

/**
 * Message for the last failed call on this thread; empty after success.
 * Valid until the next kw_* call on the same thread.
 */
const char *kw_last_error_message(void);

/**
 * Parses spec-file text into a new handle.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum KwStatus kw_spec_parse(const char *text, struct KwSpec **out);

/**
 * # Safety
 * `spec` must come from kw_spec_parse and not be used afterwards. Null is ignored.
 */
void kw_spec_free(struct KwSpec *spec);

/**
 * Number of x-labels in the spec, 0 for a null handle.
 *
 * # Safety
 * `spec` must be null or a live handle.
 */
size_t kw_spec_num_xlabels(const struct KwSpec *spec);

/**
 * Contour-ordered vacuum value of `expr` via Wick expansion.
 *
 * # Safety
 * `spec` must be live, `expr` NUL-terminated, `out` writable.
 */
enum KwStatus kw_expect(const struct KwSpec *spec, const char *expr, struct KwComplex *out);

/**
 * The same value computed on the truncated Fock space.
 *
 * # Safety
 * As for kw_expect.
 */
enum KwStatus kw_oracle_expect(const struct KwSpec *spec, const char *expr, struct KwComplex *out);

/**
 * Wick expansion of `expr` as JSON.
 *
 * # Safety
 * `spec` must be live, `expr` NUL-terminated, `out` writable.
 */
enum KwStatus kw_expand_json(const struct KwSpec *spec, const char *expr, char **out);

/**
 * Runs a verification suite (`kernels`, `causal`, `wick`, `grassmann` or
 * `all`) and writes its JSON report. A failing report is still written
 * and the call returns `KW_STATUS_VERIFICATION_FAILED`.
 *
 * # Safety
 * `spec` must be live, `suite` NUL-terminated, `out` writable.
 */
enum KwStatus kw_verify_json(const struct KwSpec *spec, const char *suite, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is ignored.
 */
void kw_string_free(char *s);

/**
 * Generator `k` (counted from 1). Returns null for `k == 0`.
 */
struct KwGrassmann *kw_grassmann_generator(uint32_t k);

struct KwGrassmann *kw_grassmann_scalar(struct KwComplex c);

/**
 * Product `a b`, or null if either operand is null.
 *
 * # Safety
 * Operands must be null or live handles.
 */
struct KwGrassmann *kw_grassmann_mul(const struct KwGrassmann *a, const struct KwGrassmann *b);

/**
 * Sum `a + b`, or null if either operand is null.
 *
 * # Safety
 * Operands must be null or live handles.
 */
struct KwGrassmann *kw_grassmann_add(const struct KwGrassmann *a, const struct KwGrassmann *b);

/**
 * Left derivative with respect to generator `k`.
 *
 * # Safety
 * `a` must be null or a live handle.
 */
struct KwGrassmann *kw_grassmann_left_deriv(const struct KwGrassmann *a, uint32_t k);

/**
 * Coefficient of the monomial `gens[0] gens[1] ...` (any order; the sign
 * of the reordering is applied).
 *
 * # Safety
 * `a` must be live; `gens` must point to `len` readable values (or be null with `len == 0`).
 */
enum KwStatus kw_grassmann_coeff(const struct KwGrassmann *a,
                                 const uint32_t *gens,
                                 size_t len,
                                 struct KwComplex *out);

/**
 * Number of nonzero terms.
 *
 * # Safety
 * `a` must be null or a live handle.
 */
size_t kw_grassmann_num_terms(const struct KwGrassmann *a);

/**
 * # Safety
 * `a` must come from this library and not be used afterwards. Null is ignored.
 */
void kw_grassmann_free(struct KwGrassmann *a);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KWICK_H */
