/* SPDX-License-Identifier: Apache-2.0 */

#ifndef PAULIDIAG_H
#define PAULIDIAG_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PdAlgorithm {
  PD_ALGORITHM_GD = 0,
  PD_ALGORITHM_RCD = 1,
} PdAlgorithm;

typedef enum PdStatus {
  PD_STATUS_OK = 0,
  PD_STATUS_NULL_POINTER = 1,
  PD_STATUS_INVALID_UTF8 = 2,
  PD_STATUS_INVALID_ARGUMENT = 3,
  PD_STATUS_PARSE = 4,
  PD_STATUS_DIMENSION_MISMATCH = 5,
  PD_STATUS_RADIAL_COLLAPSE = 6,
  PD_STATUS_DENSE_INFEASIBLE = 7,
  PD_STATUS_IO = 8,
  PD_STATUS_PANIC = 9,
} PdStatus;

/**
 * Opaque Hamiltonian.
 */
typedef struct PdHamiltonian PdHamiltonian;

/**
 * Opaque ansatz parameters.
 */
typedef struct PdParams PdParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Owned by the
 * library; valid until the next failing call on the same thread.
 */
const char *pd_last_error(void);

/**
 * Library version, static.
 */
const char *pd_version(void);

/**
 * # Safety
 * `s` is null or was returned by this library and not yet freed.
 */
void pd_string_free(char *s);

/**
 * Parses a Hamiltonian in the text format (`<coeff> <word>` per line).
 *
 * # Safety
 * `text` is a NUL-terminated string; `out` is writable.
 */
enum PdStatus pd_hamiltonian_parse(const char *text, struct PdHamiltonian **out);

/**
 * Builds a model Hamiltonian from a JSON model spec such as
 * `{"family": "xxz", "n": 4, "delta": 1.0}`.
 *
 * # Safety
 * `spec_json` is a NUL-terminated string; `out` is writable.
 */
enum PdStatus pd_hamiltonian_from_model(const char *spec_json, struct PdHamiltonian **out);

/**
 * # Safety
 * `h` is a valid handle.
 */
size_t pd_hamiltonian_num_qubits(const struct PdHamiltonian *h);

/**
 * # Safety
 * `h` is a valid handle.
 */
size_t pd_hamiltonian_num_terms(const struct PdHamiltonian *h);

/**
 * Text form of the Hamiltonian; free with [`pd_string_free`].
 *
 * # Safety
 * `h` is a valid handle; `out` is writable.
 */
enum PdStatus pd_hamiltonian_to_text(const struct PdHamiltonian *h, char **out);

/**
 * # Safety
 * `h` is null or a handle not yet freed.
 */
void pd_hamiltonian_free(struct PdHamiltonian *h);

/**
 * Parameters from their JSON form.
 *
 * # Safety
 * `json` is a NUL-terminated string; `out` is writable.
 */
enum PdStatus pd_params_from_json(const char *json, struct PdParams **out);

/**
 * JSON form of the parameters; free with [`pd_string_free`].
 *
 * # Safety
 * `p` is a valid handle; `out` is writable.
 */
enum PdStatus pd_params_to_json(const struct PdParams *p, char **out);

/**
 * Eigenvector matrix of `reference` expanded in Pauli strings; a
 * non-positive `prune_tol` selects the default.
 *
 * # Safety
 * `reference` is a valid handle; `out` is writable.
 */
enum PdStatus pd_params_warm_start(const struct PdHamiltonian *reference,
                                   double prune_tol,
                                   struct PdParams **out);

/**
 * Number of ansatz strings `d`.
 *
 * # Safety
 * `p` is a valid handle.
 */
size_t pd_params_dim(const struct PdParams *p);

/**
 * # Safety
 * `p` is null or a handle not yet freed.
 */
void pd_params_free(struct PdParams *p);

/**
 * Off-diagonal cost `f` and orthogonality penalty `Φ`.
 *
 * # Safety
 * Handles are valid; outputs are writable.
 */
enum PdStatus pd_eval(const struct PdHamiltonian *h,
                      const struct PdParams *p,
                      double *out_f,
                      double *out_penalty);

/**
 * `‖H − H̃‖_F` by dense reconstruction.
 *
 * # Safety
 * Handles are valid; `out` is writable.
 */
enum PdStatus pd_frobenius_error(const struct PdHamiltonian *h,
                                 const struct PdParams *p,
                                 double *out);

/**
 * Minimizes the cost from `start` (normalized first). `opt_json` holds
 * optimizer settings as JSON, or null for the defaults. Writes a new
 * handle with the final parameters, the final total cost and the number
 * of steps taken.
 *
 * # Safety
 * Handles are valid; `opt_json` is null or NUL-terminated; outputs are
 * writable.
 */
enum PdStatus pd_diagonalize(const struct PdHamiltonian *h,
                             const struct PdParams *start,
                             enum PdAlgorithm algorithm,
                             const char *opt_json,
                             struct PdParams **out_params,
                             double *out_cost,
                             size_t *out_iterations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PAULIDIAG_H */
