#ifndef LFBC_H
#define LFBC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LfbcStatus {
  LFBC_STATUS_OK = 0,
  LFBC_STATUS_NULL_POINTER = 1,
  LFBC_STATUS_INVALID_ARGUMENT = 2,
  LFBC_STATUS_DIMENSION = 3,
  LFBC_STATUS_SOLVER = 4,
  LFBC_STATUS_SIMULATION = 5,
  LFBC_STATUS_IO = 6,
  LFBC_STATUS_BUFFER_TOO_SMALL = 7,
  LFBC_STATUS_PANIC = 8,
} LfbcStatus;

// Gaussian broadcast channel: power budget and sorted noise variances.
typedef struct LfbcChannel LfbcChannel;

// Private-message construction built from a scheme document.
typedef struct LfbcPrivateScheme LfbcPrivateScheme;

// Multi-phase protocol with prebuilt codebooks.
typedef struct LfbcProtocol LfbcProtocol;

// Monte Carlo summary of a protocol run.
typedef struct LfbcTrialReport {
  uint64_t trials;
  uint64_t errors;
  double p_hat;
  double ci_low;
  double ci_high;
  double mean_power;
  double power_stderr;
  double mean_fb_nats;
  uint64_t e1;
  uint64_t e2;
  uint64_t e3;
} LfbcTrialReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread; empty if none. The
// pointer stays valid until the next failing call on this thread.
const char *lfbc_last_error(void);

// Gaussian tail probability Q(x).
double lfbc_q(double x);

// # Safety
// `variances` must point to `k` doubles; `out` must be writable.
enum LfbcStatus lfbc_channel_new(double power,
                                 const double *variances,
                                 uintptr_t k,
                                 struct LfbcChannel **out);

// # Safety
// `ch` must be NULL or a handle from `lfbc_channel_new` not yet freed.
void lfbc_channel_free(struct LfbcChannel *ch);

// # Safety
// `ch` must be a live channel handle.
uintptr_t lfbc_channel_num_receivers(const struct LfbcChannel *ch);

// # Safety
// `ch` must be a live channel handle; `out` must be writable.
enum LfbcStatus lfbc_capacity(const struct LfbcChannel *ch, double *out);

// # Safety
// `ch` must be a live channel handle; `out` must be writable.
enum LfbcStatus lfbc_envelope(const struct LfbcChannel *ch, double *out);

// # Safety
// `ch` must be a live channel handle; `out` must be writable.
enum LfbcStatus lfbc_linfb_upper_bound(const struct LfbcChannel *ch, double *out);

// Writes the K power fractions to `alphas` (capacity `len`, in the
// channel's sorted order) and the equalized rate to `common_rate`.
//
// # Safety
// `ch` must be a live channel handle; `alphas` must hold `len` doubles and
// `common_rate` must be writable.
enum LfbcStatus lfbc_alpha_star(const struct LfbcChannel *ch,
                                double tol,
                                double *alphas,
                                uintptr_t len,
                                double *common_rate);

// Builds a protocol from its JSON configuration; the channel's power is
// replaced by the configuration's power budget.
//
// # Safety
// `config_json` must be a NUL-terminated string; `ch` a live channel
// handle; `out` writable.
enum LfbcStatus lfbc_protocol_new_json(const char *config_json,
                                       const struct LfbcChannel *ch,
                                       struct LfbcProtocol **out);

// # Safety
// `p` must be NULL or a handle from `lfbc_protocol_new_json` not yet freed.
void lfbc_protocol_free(struct LfbcProtocol *p);

// One transmission of `message` with noise from `seed`. Final guesses go to
// `guesses` (capacity `len`, one per receiver); `error` is set to 1 if any
// receiver is wrong.
//
// # Safety
// `p` must be a live protocol handle; `guesses` must hold `len` values and
// `error` must be writable.
enum LfbcStatus lfbc_protocol_run(const struct LfbcProtocol *p,
                                  uint64_t message,
                                  uint64_t seed,
                                  uint64_t *guesses,
                                  uintptr_t len,
                                  int32_t *error);

// Monte Carlo over seeds `seed..seed + trials` with seed-derived messages.
//
// # Safety
// `p` must be a live protocol handle; `out` must be writable.
enum LfbcStatus lfbc_protocol_estimate(const struct LfbcProtocol *p,
                                       uint64_t trials,
                                       uint64_t seed,
                                       struct LfbcTrialReport *out);

// Private-message construction from a scheme document
// (`{n, K, d, A, theta_variance}`, matrices in the caller's receiver order)
// with one rate in nats per receiver.
//
// # Safety
// `scheme_json` must be NUL-terminated; `ch` a live channel handle;
// `rates` must hold `len` doubles; `out` writable.
enum LfbcStatus lfbc_private_scheme_new_json(const char *scheme_json,
                                             const struct LfbcChannel *ch,
                                             const double *rates,
                                             uintptr_t len,
                                             struct LfbcPrivateScheme **out);

// # Safety
// `s` must be NULL or a handle from `lfbc_private_scheme_new_json` not yet freed.
void lfbc_private_scheme_free(struct LfbcPrivateScheme *s);

// Analytic information about Z_{k,1-k} at receiver `k` (sorted order, 0-based).
//
// # Safety
// `s` must be a live handle; `out` writable.
enum LfbcStatus lfbc_private_scheme_mutual_info(const struct LfbcPrivateScheme *s,
                                                uintptr_t k,
                                                double *out);

// Upper bound on receiver `k`'s message error probability.
//
// # Safety
// `s` must be a live handle; `out` writable.
enum LfbcStatus lfbc_private_scheme_error_bound(const struct LfbcPrivateScheme *s,
                                                uintptr_t k,
                                                double *out);

// Measured error rate of receiver `k` over `trials` seeded transmissions.
//
// # Safety
// `s` must be a live handle; `out` writable.
enum LfbcStatus lfbc_private_scheme_error_rate(const struct LfbcPrivateScheme *s,
                                               uintptr_t k,
                                               uint64_t trials,
                                               uint64_t seed,
                                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LFBC_H */
