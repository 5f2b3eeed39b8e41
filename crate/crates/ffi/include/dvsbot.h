#ifndef DVSBOT_H
#define DVSBOT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DvsStatus {
  DVS_STATUS_OK = 0,
  DVS_STATUS_NULL_POINTER = 1,
  DVS_STATUS_INVALID_ARGUMENT = 2,
  DVS_STATUS_MALFORMED = 3,
  DVS_STATUS_BUFFER_TOO_SMALL = 4,
  DVS_STATUS_UNDEFINED_DELAY = 5,
  DVS_STATUS_INSUFFICIENT_DATA = 6,
  DVS_STATUS_PANIC = 7,
} DvsStatus;

/**
 * Elbow servo model with its current state.
 */
typedef struct DvsServo DvsServo;

/**
 * Client-side vision state: noise filter, ROI window and smoother.
 */
typedef struct DvsTracker DvsTracker;

/**
 * One event. `polarity` is 1 for ON, 0 for OFF.
 */
typedef struct DvsEvent {
  uint16_t x;
  uint16_t y;
  uint32_t ts;
  uint8_t polarity;
} DvsEvent;

typedef struct DvsRoi {
  uint32_t seq;
  uint64_t ts;
  float cx;
  float cy;
} DvsRoi;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *dvs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dvs_version(void);

/**
 * Encodes one event into exactly 8 bytes at `out`.
 *
 * # Safety
 * `event` must be valid for reads and `out` valid for 8 bytes of writes.
 */
enum DvsStatus dvs_encode_event(const struct DvsEvent *event, uint8_t *out);

/**
 * Decodes 8 bytes at `bytes` into `out`.
 *
 * # Safety
 * `bytes` must be valid for 8 bytes of reads and `out` valid for writes.
 */
enum DvsStatus dvs_decode_event(const uint8_t *bytes, struct DvsEvent *out);

/**
 * Frames `count` events as an event datagram into `out`. The datagram size
 * is written to `out_len`; if `out_cap` is too small nothing else is written
 * and `DVS_STATUS_BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * `events` must be valid for `count` reads (may be null when `count` is 0),
 * `out` valid for `out_cap` bytes of writes and `out_len` valid for writes.
 */
enum DvsStatus dvs_frame_events(uint32_t seq,
                                const struct DvsEvent *events,
                                size_t count,
                                uint8_t *out,
                                size_t out_cap,
                                size_t *out_len);

/**
 * Parses an event datagram. The event count is written to `out_count`; if
 * it exceeds `cap` nothing else is written and
 * `DVS_STATUS_BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * `bytes` must be valid for `len` reads, `events` valid for `cap` writes
 * (may be null when `cap` is 0), `out_seq` and `out_count` valid for writes.
 */
enum DvsStatus dvs_parse_events(const uint8_t *bytes,
                                size_t len,
                                uint32_t *out_seq,
                                struct DvsEvent *events,
                                size_t cap,
                                size_t *out_count);

/**
 * Frames a ROI message into 20 bytes at `out`.
 *
 * # Safety
 * `roi` must be valid for reads and `out` valid for 20 bytes of writes.
 */
enum DvsStatus dvs_frame_roi(const struct DvsRoi *roi, uint8_t *out);

/**
 * Parses a ROI datagram of `len` bytes.
 *
 * # Safety
 * `bytes` must be valid for `len` reads and `out` valid for writes.
 */
enum DvsStatus dvs_parse_roi(const uint8_t *bytes, size_t len, struct DvsRoi *out);

/**
 * Delay of `slave` behind `master` in milliseconds. Both traces are
 * uniformly sampled at `rate_hz` starting at their own `t0_us`.
 *
 * # Safety
 * `master` and `slave` must be valid for `master_len` and `slave_len`
 * reads, `out_ms` valid for writes.
 */
enum DvsStatus dvs_estimate_delay(const double *master,
                                  size_t master_len,
                                  uint64_t master_t0_us,
                                  const double *slave,
                                  size_t slave_len,
                                  uint64_t slave_t0_us,
                                  double rate_hz,
                                  double *out_ms);

/**
 * Elbow angle in degrees for a ROI center, with the default image-to-joint
 * map.
 *
 * # Safety
 * `out_deg` must be valid for writes.
 */
enum DvsStatus dvs_map_center_to_angle(double cx, double cy, double *out_deg);

/**
 * New client vision state with default parameters.
 */
struct DvsTracker *dvs_tracker_new(void);

/**
 * Feeds one packet of raw (unfiltered) events. `has_roi` is set to 1 and
 * `cx`, `cy` to the smoothed ROI center when a ROI was found, else 0.
 *
 * # Safety
 * `tracker` must come from [`dvs_tracker_new`] and not be freed; `events`
 * valid for `count` reads (may be null when `count` is 0); the outputs
 * valid for writes.
 */
enum DvsStatus dvs_tracker_process(struct DvsTracker *tracker,
                                   uint32_t seq,
                                   const struct DvsEvent *events,
                                   size_t count,
                                   uint8_t *has_roi,
                                   double *cx,
                                   double *cy);

/**
 * # Safety
 * `tracker` must come from [`dvs_tracker_new`] and not be used afterwards.
 * Null is ignored.
 */
void dvs_tracker_free(struct DvsTracker *tracker);

/**
 * New servo at rest at `q0_deg`. Returns null and sets the last error if
 * `gain` or `lookahead_s` is out of range.
 */
struct DvsServo *dvs_servo_new(double gain, double lookahead_s, double q0_deg);

/**
 * Advances the servo one 8 ms tick toward `reference_deg`.
 *
 * # Safety
 * `servo` must come from [`dvs_servo_new`] and not be freed; `q` and `qd`
 * valid for writes.
 */
enum DvsStatus dvs_servo_step(struct DvsServo *servo, double reference_deg, double *q, double *qd);

/**
 * # Safety
 * `servo` must come from [`dvs_servo_new`] and not be used afterwards.
 * Null is ignored.
 */
void dvs_servo_free(struct DvsServo *servo);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DVSBOT_H */
