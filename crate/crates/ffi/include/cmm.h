#ifndef CMM_H
#define CMM_H

#include <stdint.h>
#include <stddef.h>

// Object class codes used across the ABI.
#define CMM_CLASS_CAR 0

#define CMM_CLASS_TRUCK 1

#define CMM_CLASS_PEDESTRIAN 2

typedef enum CmmStatus {
  CMM_STATUS_OK = 0,
  // Nothing available (no complete frame, no due message).
  CMM_STATUS_EMPTY = 1,
  CMM_STATUS_NULL_POINTER = 2,
  CMM_STATUS_INVALID_ARGUMENT = 3,
  // A message failed to decode; the decoder skipped it.
  CMM_STATUS_PROTOCOL = 4,
  // The output buffer is too small; the required size was reported.
  CMM_STATUS_BUFFER_TOO_SMALL = 5,
  CMM_STATUS_CONFIG = 6,
  CMM_STATUS_PANIC = 7,
} CmmStatus;

// Seeded delay/drop channel carrying byte messages on a simulation clock.
typedef struct CmmChannel CmmChannel;

// Incremental stream decoder.
typedef struct CmmDecoder CmmDecoder;

// Latest-frame-wins registry of world-frame objects.
typedef struct CmmMirror CmmMirror;

// A scenario and its current world state.
typedef struct CmmScenario CmmScenario;

typedef struct CmmIdmParams {
  double desired_speed;
  double time_headway;
  double max_accel;
  double comfort_decel;
  double jam_distance;
  double exponent;
  double emergency_decel;
} CmmIdmParams;

typedef struct CmmBox {
  double cx;
  double cy;
  double length;
  double width;
  double yaw;
} CmmBox;

typedef struct CmmObject {
  int32_t cls;
  double x;
  double y;
  double l;
  double w;
  double yaw;
  double conf;
} CmmObject;

typedef struct CmmFrameHeader {
  uint64_t frame_id;
  uint64_t sim_time_ms;
  uintptr_t n_objects;
} CmmFrameHeader;

typedef struct CmmChannelConfig {
  double innate_delay_ms;
  double acd_mean_ms;
  double acd_std_ms;
  double drop_threshold;
  uint64_t seed;
  uint64_t tick_ms;
} CmmChannelConfig;

typedef struct CmmAgent {
  uint32_t id;
  int32_t cls;
  double x;
  double y;
  double yaw;
  double speed;
  double accel;
  double length;
  double width;
  double height;
} CmmAgent;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the last error message (NUL-terminated, truncated to `cap`) and
// return its full length in bytes, excluding the terminator.
//
// # Safety
// `buf` must be NULL or point to `cap` writable bytes.
uintptr_t cmm_last_error(char *buf, uintptr_t cap);

// Returned intensity of a point at range `d` under attenuation `a`.
//
// # Safety
// `out` must be NULL or valid for a write.
enum CmmStatus cmm_intensity(double d, double a, double *out);

// Default IDM parameters.
struct CmmIdmParams cmm_idm_default_params(void);

// IDM acceleration. `params` may be NULL for the defaults; pass an
// infinite `gap` for free road.
//
// # Safety
// `params` must be NULL or valid for a read; `out` valid for a write.
enum CmmStatus cmm_idm_acceleration(double v,
                                    double v_lead,
                                    double gap,
                                    const struct CmmIdmParams *params,
                                    double *out);

// Intersection-over-union of two oriented boxes.
//
// # Safety
// `a` and `b` must be valid for reads; `out` valid for a write.
enum CmmStatus cmm_oriented_iou(const struct CmmBox *a, const struct CmmBox *b, double *out);

// Harmonic mean of precision and recall; 0 when both are 0.
double cmm_f1_score(double precision, double recall);

// Encode a frame as a length-prefixed message into `out`. `written`
// receives the message size, also when the buffer is too small.
//
// # Safety
// `sensor_id` must be a NUL-terminated string; `objects` must point to
// `n_objects` items (or be NULL when 0); `out` to `cap` writable bytes;
// `written` valid for a write.
enum CmmStatus cmm_encode_frame(uint64_t frame_id,
                                uint64_t sim_time_ms,
                                const char *sensor_id,
                                const struct CmmObject *objects,
                                uintptr_t n_objects,
                                uint8_t *out,
                                uintptr_t cap,
                                uintptr_t *written);

struct CmmDecoder *cmm_decoder_new(void);

// # Safety
// `dec` must be NULL or a pointer from [`cmm_decoder_new`] not yet freed.
void cmm_decoder_free(struct CmmDecoder *dec);

// Append received bytes.
//
// # Safety
// `dec` must be a live decoder; `data` must point to `len` readable bytes.
enum CmmStatus cmm_decoder_push(struct CmmDecoder *dec, const uint8_t *data, uintptr_t len);

// Take the next complete frame. Returns `Empty` when none is buffered,
// `Protocol` for a skipped malformed message, and `BufferTooSmall` (with
// `header->n_objects` set) when `cap` is too small, in which case the frame
// stays queued for the next call.
//
// # Safety
// `dec` must be a live decoder; `header` valid for a write; `objects` must
// point to `cap` writable items (or be NULL when `cap` is 0).
enum CmmStatus cmm_decoder_next(struct CmmDecoder *dec,
                                struct CmmFrameHeader *header,
                                struct CmmObject *objects,
                                uintptr_t cap);

// Messages skipped as malformed so far.
//
// # Safety
// `dec` must be NULL or a live decoder.
uint64_t cmm_decoder_errors(const struct CmmDecoder *dec);

// # Safety
// `cfg` must be NULL (defaults) or valid for a read.
struct CmmChannel *cmm_channel_new(const struct CmmChannelConfig *cfg);

// # Safety
// `ch` must be NULL or a pointer from [`cmm_channel_new`] not yet freed.
void cmm_channel_free(struct CmmChannel *ch);

// Submit a message at `now_ms`; `dropped` (may be NULL) is set to 1 when
// the channel drops it.
//
// # Safety
// `ch` must be a live channel; `data` must point to `len` readable bytes.
enum CmmStatus cmm_channel_send(struct CmmChannel *ch,
                                const uint8_t *data,
                                uintptr_t len,
                                uint64_t frame_id,
                                uint64_t now_ms,
                                int32_t *dropped);

// Copy out the next message due by `now_ms`. Returns `Empty` when none is
// due and `BufferTooSmall` (with `len` set) when `cap` is too small.
//
// # Safety
// `ch` must be a live channel; `out` must point to `cap` writable bytes;
// `len` valid for a write.
enum CmmStatus cmm_channel_poll(struct CmmChannel *ch,
                                uint64_t now_ms,
                                uint8_t *out,
                                uintptr_t cap,
                                uintptr_t *len);

// Counters since creation: sent, dropped and delivered messages.
//
// # Safety
// `ch` must be a live channel; the out pointers may each be NULL.
enum CmmStatus cmm_channel_stats(const struct CmmChannel *ch,
                                 uint64_t *sent,
                                 uint64_t *dropped,
                                 uint64_t *delivered);

// `x`, `y`, `yaw` place the sensor frame in the world.
//
// # Safety
// `sensor_id` must be a NUL-terminated string.
struct CmmMirror *cmm_mirror_new(const char *sensor_id, double x, double y, double yaw);

// # Safety
// `m` must be NULL or a pointer from [`cmm_mirror_new`] not yet freed.
void cmm_mirror_free(struct CmmMirror *m);

// Apply one length-prefixed message. `accepted` (may be NULL) is set to 0
// when the frame is older than the current contents.
//
// # Safety
// `m` must be a live mirror; `data` must point to `len` readable bytes.
enum CmmStatus cmm_mirror_apply(struct CmmMirror *m,
                                const uint8_t *data,
                                uintptr_t len,
                                uint64_t now_ms,
                                int32_t *accepted);

// Copy the current objects. `staleness_ms` receives -1 if no frame was
// ever accepted. `n` receives the object count, also when `cap` is too
// small.
//
// # Safety
// `m` must be a live mirror; `objects` must point to `cap` writable items;
// `n` and `staleness_ms` valid for writes.
enum CmmStatus cmm_mirror_query(const struct CmmMirror *m,
                                uint64_t now_ms,
                                struct CmmObject *objects,
                                uintptr_t cap,
                                uintptr_t *n,
                                int64_t *staleness_ms);

// Build a scenario from TOML text. Returns NULL on error (see
// [`cmm_last_error`]).
//
// # Safety
// `toml_text` must be a NUL-terminated string.
struct CmmScenario *cmm_scenario_from_toml(const char *toml_text);

// # Safety
// `s` must be NULL or a pointer from [`cmm_scenario_from_toml`] not yet
// freed.
void cmm_scenario_free(struct CmmScenario *s);

// Advance one 100 ms tick with no external commands.
//
// # Safety
// `s` must be a live scenario.
enum CmmStatus cmm_scenario_step(struct CmmScenario *s);

// Current tick, or 0 for NULL.
//
// # Safety
// `s` must be NULL or a live scenario.
uint64_t cmm_scenario_tick(const struct CmmScenario *s);

// Copy the agents, sorted by id. `n` receives the count, also when `cap`
// is too small.
//
// # Safety
// `s` must be a live scenario; `out` must point to `cap` writable items;
// `n` valid for a write.
enum CmmStatus cmm_scenario_agents(const struct CmmScenario *s,
                                   struct CmmAgent *out,
                                   uintptr_t cap,
                                   uintptr_t *n);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CMM_H */
