import { describe, expect, it } from "vitest";

import { advance, initialState, pause, play, seek, selectLink, step } from "../src/playback.js";

describe("step", () => {
  it("moves one slot forward and backward", () => {
    let s = initialState(10);
    s = step(s, 1);
    expect(s.slot).toBe(1);
    s = step(s, -1);
    expect(s.slot).toBe(0);
  });

  it("clamps at the start", () => {
    const s = step(initialState(10), -1);
    expect(s.slot).toBe(0);
  });

  it("clamps at the end and pauses", () => {
    let s = { ...initialState(10), slot: 9, position: 9, playing: true };
    s = step(s, 1);
    expect(s.slot).toBe(9);
    expect(s.playing).toBe(false);
  });

  it("never wraps", () => {
    let s = initialState(3);
    for (let i = 0; i < 10; i++) s = step(s, 1);
    expect(s.slot).toBe(2);
    for (let i = 0; i < 10; i++) s = step(s, -1);
    expect(s.slot).toBe(0);
  });
});

describe("play and advance", () => {
  it("traverses 10 slots in 5 wall seconds at 2x", () => {
    let s = play(initialState(10), 2);
    // Simulate ~60 fps frames for 5 s of wall clock.
    const frame = 1 / 60;
    let elapsed = 0;
    while (elapsed < 5.0 && s.playing) {
      s = advance(s, frame);
      elapsed += frame;
    }
    expect(s.slot).toBe(9); // reached the last slot within one frame of 4.5 s
    expect(s.playing).toBe(false);
  });

  it("advances at one slot per second at 1x", () => {
    let s = play(initialState(100), 1);
    s = advance(s, 3.25);
    expect(s.slot).toBe(3);
    expect(s.position).toBeCloseTo(3.25);
  });

  it("half speed covers half the distance", () => {
    let s = play(initialState(100), 0.5);
    s = advance(s, 4);
    expect(s.slot).toBe(2);
  });

  it("clamps at the final slot and pauses", () => {
    let s = play(initialState(5), 5);
    s = advance(s, 60);
    expect(s.slot).toBe(4);
    expect(s.playing).toBe(false);
  });

  it("does not start playing when already at the end", () => {
    const s = play({ ...initialState(5), slot: 4, position: 4 });
    expect(s.playing).toBe(false);
  });

  it("pause freezes the position", () => {
    let s = play(initialState(10), 2);
    s = advance(s, 1);
    s = pause(s);
    const frozen = s.slot;
    s = advance(s, 10);
    expect(s.slot).toBe(frozen);
  });
});

describe("seek and selection", () => {
  it("seeks exactly and clamps", () => {
    expect(seek(initialState(10), 7).slot).toBe(7);
    expect(seek(initialState(10), 42).slot).toBe(9);
    expect(seek(initialState(10), -3).slot).toBe(0);
  });

  it("link selection toggles", () => {
    let s = selectLink(initialState(5), "MR1", "AR1");
    expect(s.selectedLink).toEqual({ src: "MR1", dst: "AR1" });
    s = selectLink(s, "MR1", "AR1");
    expect(s.selectedLink).toBeNull();
  });

  it("empty timeline stays at slot 0", () => {
    const s = initialState(0);
    expect(step(s, 1).slot).toBe(0);
    expect(advance(play(s, 5), 10).slot).toBe(0);
  });
});
