/**
 * Playback state machine: scrub, single-step, play at a chosen speed.
 *
 * The slot index always clamps at the timeline ends, never wraps, and
 * reaching the last slot while playing pauses the player.
 */

export const SPEEDS = [0.5, 1, 2, 5] as const;
export type Speed = (typeof SPEEDS)[number];

export interface PlaybackState {
  /** Current slot index, integer in [0, lastSlot]. */
  slot: number;
  /** Fractional position used while playing; floor(position) === slot. */
  position: number;
  playing: boolean;
  speed: Speed;
  lastSlot: number;
  selectedLink: { src: string; dst: string } | null;
  selectedNode: string | null;
}

export function initialState(slotCount: number): PlaybackState {
  return {
    slot: 0,
    position: 0,
    playing: false,
    speed: 1,
    lastSlot: Math.max(0, slotCount - 1),
    selectedLink: null,
    selectedNode: null,
  };
}

function clampIndex(state: PlaybackState, index: number): number {
  return Math.min(Math.max(index, 0), state.lastSlot);
}

export function seek(state: PlaybackState, slot: number): PlaybackState {
  const next = clampIndex(state, Math.floor(slot));
  return { ...state, slot: next, position: next };
}

export function step(state: PlaybackState, direction: 1 | -1): PlaybackState {
  const next = clampIndex(state, state.slot + direction);
  // Stepping onto the last slot also stops a running player.
  const playing = state.playing && next !== state.slot && next < state.lastSlot;
  return { ...state, slot: next, position: next, playing };
}

export function play(state: PlaybackState, speed: Speed = state.speed): PlaybackState {
  if (state.slot >= state.lastSlot) return { ...state, speed, playing: false };
  return { ...state, speed, playing: true };
}

export function pause(state: PlaybackState): PlaybackState {
  return { ...state, playing: false };
}

/**
 * Advance a playing state by wall-clock seconds: speed x 1 slot per second.
 * Clamps at the end and pauses there.
 */
export function advance(state: PlaybackState, elapsedSeconds: number): PlaybackState {
  if (!state.playing || elapsedSeconds <= 0) return state;
  const position = state.position + elapsedSeconds * state.speed;
  if (position >= state.lastSlot) {
    return { ...state, position: state.lastSlot, slot: state.lastSlot, playing: false };
  }
  return { ...state, position, slot: Math.floor(position) };
}

export function selectLink(state: PlaybackState, src: string, dst: string): PlaybackState {
  const same = state.selectedLink?.src === src && state.selectedLink?.dst === dst;
  return { ...state, selectedLink: same ? null : { src, dst }, selectedNode: null };
}

export function selectNode(state: PlaybackState, name: string): PlaybackState {
  return { ...state, selectedNode: state.selectedNode === name ? null : name, selectedLink: null };
}
