#ifndef MINWISE_LAB_H
#define MINWISE_LAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MwlStatus {
  MWL_STATUS_OK = 0,
  MWL_STATUS_NULL_POINTER = 1,
  MWL_STATUS_INVALID_UTF8 = 2,
  MWL_STATUS_CONFIG = 3,
  MWL_STATUS_PARAM = 4,
  MWL_STATUS_BAD_SEED = 5,
  MWL_STATUS_DOMAIN = 6,
  MWL_STATUS_INTERNAL = 7,
} MwlStatus;

/**
 * A seeded hash family `[N] -> [M]`.
 */
typedef struct MwlFamily MwlFamily;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a family from a JSON config. On success `*out` owns a handle that
 * must be released with [`mwl_family_free`].
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` valid for writes.
 */
enum MwlStatus mwl_family_from_json(const char *json, struct MwlFamily **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `f` must be null or a handle not yet freed.
 */
void mwl_family_free(struct MwlFamily *f);

/**
 * Seed length in bits, or 0 for a null handle.
 *
 * # Safety
 * `f` must be null or a live handle.
 */
size_t mwl_family_seed_bits(const struct MwlFamily *f);

/**
 * Domain size `N`, or 0 for a null handle.
 *
 * # Safety
 * `f` must be null or a live handle.
 */
uint64_t mwl_family_domain(const struct MwlFamily *f);

/**
 * Range size `M`, or 0 for a null handle.
 *
 * # Safety
 * `f` must be null or a live handle.
 */
uint64_t mwl_family_range(const struct MwlFamily *f);

/**
 * Evaluates `h_seed(x)`. The seed is little-endian: bit `i` is bit `i % 8`
 * of byte `i / 8`. Exactly `ceil(seed_bits / 8)` bytes are expected and
 * padding bits must be zero.
 *
 * # Safety
 * `seed` must point to `seed_len` readable bytes (or be null when
 * `seed_len` is 0) and `out` must be valid for writes.
 */
enum MwlStatus mwl_family_eval(const struct MwlFamily *f,
                               const uint8_t *seed,
                               size_t seed_len,
                               uint64_t x,
                               uint64_t *out);

/**
 * As [`mwl_family_eval`] with the seed as a hex integer (`0x` optional).
 *
 * # Safety
 * `hex` must be a NUL-terminated string and `out` valid for writes.
 */
enum MwlStatus mwl_family_eval_hex(const struct MwlFamily *f,
                                   const char *hex,
                                   uint64_t x,
                                   uint64_t *out);

/**
 * `Pr[max h(Y) < min h(X \ Y)]` for a truly random `h: X -> [M]`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum MwlStatus mwl_uniform_minwise_probability(size_t size_x, uint64_t m, size_t k, double *out);

/**
 * `low_m(x * (s + 1))` over GF(2^n) with the library's default modulus.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum MwlStatus mwl_leftover_extract(uint32_t n, uint64_t x, uint64_t s, uint32_t m, uint64_t *out);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the buffer size the full message needs.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes of writes.
 */
size_t mwl_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MINWISE_LAB_H */
