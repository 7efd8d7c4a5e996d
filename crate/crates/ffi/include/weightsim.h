#ifndef WEIGHTSIM_H
#define WEIGHTSIM_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WsStatus {
  WS_STATUS_OK = 0,
  WS_STATUS_NULL_POINTER = 1,
  WS_STATUS_INVALID_UTF8 = 2,
  WS_STATUS_INVALID_ARGUMENT = 3,
  /**
   * The engine refused the request (bad frame, illegal action, ...).
   */
  WS_STATUS_REJECTED = 4,
  WS_STATUS_BUFFER_TOO_SMALL = 5,
  WS_STATUS_PANIC = 6,
} WsStatus;

/**
 * Opaque game handle.
 */
typedef struct WsGame WsGame;

/**
 * Opaque play session handle.
 */
typedef struct WsSession WsSession;

/**
 * Decoded sensor frame.
 */
typedef struct WsFrame {
  uint32_t seq;
  uint64_t time_ms;
  uint16_t thumb_adc;
  uint16_t palm_adc;
} WsFrame;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or NULL.
 * Valid until the next call into this library from the same thread.
 */
const char *ws_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void ws_string_free(char *s);

/**
 * Weight of `mass_g` grams in Newtons.
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
enum WsStatus ws_expected_force(double mass_g, double gravity, double *out);

/**
 * Control/display ratio for a grip force, clamped to `[0, ratio_cap]`.
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
enum WsStatus ws_cd_ratio(double actual_force, double expected, double ratio_cap, double *out);

/**
 * # Safety
 * `out` must be a valid pointer to a double.
 */
enum WsStatus ws_adc_to_voltage(uint16_t adc, double *out);

/**
 * Force for a reading under `F = a * V^b` with a deadband.
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
enum WsStatus ws_adc_to_force(uint16_t adc, double a, double b, uint16_t deadband_adc, double *out);

/**
 * Encodes a frame, newline included, without a terminating NUL.
 * `written` receives the frame length, also when the buffer is too small.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes; `written` must be valid.
 */
enum WsStatus ws_encode_frame(struct WsFrame frame, uint8_t *buf, size_t cap, size_t *written);

/**
 * Decodes one LF-terminated frame of `len` bytes.
 *
 * # Safety
 * `line` must point to `len` readable bytes; `out` must be valid.
 */
enum WsStatus ws_parse_frame(const uint8_t *line, size_t len, struct WsFrame *out);

/**
 * New game: `kind` 0 arranges cubes, 1 balances the scale. NULL on bad kind.
 */
struct WsGame *ws_game_new(uint32_t kind, uint64_t seed);

/**
 * # Safety
 * `game` must come from `ws_game_new` and not have been freed. NULL is ignored.
 */
void ws_game_free(struct WsGame *game);

/**
 * Applies `{"name": "grab"|"release"|"submit"|"reset"|"restart"|"giveup", "cube"?, "target"?}`.
 * A rejected action leaves the game unchanged.
 *
 * # Safety
 * `game` must be a live handle; `action_json` a NUL-terminated string.
 */
enum WsStatus ws_game_apply_json(struct WsGame *game, const char *action_json);

/**
 * Full game state as JSON. Free with `ws_string_free`.
 *
 * # Safety
 * `game` must be a live handle.
 */
char *ws_game_state_json(const struct WsGame *game);

/**
 * Play session with the reference glove calibration and default dynamics.
 */
struct WsSession *ws_session_new(uint32_t kind, uint64_t seed, bool cd_enabled);

/**
 * # Safety
 * `session` must come from `ws_session_new` and not have been freed. NULL is ignored.
 */
void ws_session_free(struct WsSession *session);

/**
 * Feeds one client message (`force`, `hand` or `action`, as on the socket).
 *
 * # Safety
 * `session` must be a live handle; `message_json` a NUL-terminated string.
 */
enum WsStatus ws_session_handle_json(struct WsSession *session, const char *message_json);

/**
 * Advances one tick and returns the snapshot as JSON. Free with `ws_string_free`.
 *
 * # Safety
 * `session` must be a live handle.
 */
char *ws_session_tick(struct WsSession *session);

/**
 * Current snapshot as JSON without advancing. Free with `ws_string_free`.
 *
 * # Safety
 * `session` must be a live handle.
 */
char *ws_session_snapshot(const struct WsSession *session);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WEIGHTSIM_H */
