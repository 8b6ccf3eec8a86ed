import { describe, expect, it } from "vitest";

import * as st from "../src/state.js";
import { PANELS, PREDICT_FRACTURED, PREDICT_INTACT } from "./fixtures.js";

describe("view state transitions", () => {
  it("allows at most one in-flight request", () => {
    const first = st.beginRequest(st.initialState());
    expect(first).not.toBeNull();
    expect(first!.inFlight).toBe(true);
    expect(st.beginRequest(first!)).toBeNull();
  });

  it("a failure clears any previous result before showing the banner", () => {
    let s = st.predictionReceived(st.initialState(), PREDICT_FRACTURED);
    s = st.panelsReceived(s, PANELS);
    s = st.requestFailed(st.beginRequest(s)!, "model not loaded");

    expect(s.banner).toBe("model not loaded");
    expect(s.prediction).toBeNull();
    expect(s.panels).toBeNull();
    expect(s.inFlight).toBe(false);
  });

  it("selecting a new image clears the banner", () => {
    let s = st.requestFailed(st.initialState(), "boom");
    s = st.selectImage(s, "blob:x", "wrist.png");
    expect(s.banner).toBeNull();
    expect(s.imageUrl).toBe("blob:x");
  });

  it("overlay controls stay disabled until a heatmap is present", () => {
    const bare = st.initialState();
    expect(st.overlayControlsEnabled(bare)).toBe(false);

    const noHeatmap = st.predictionReceived(bare, PREDICT_INTACT);
    expect(st.overlayControlsEnabled(noHeatmap)).toBe(false);

    const withHeatmap = st.predictionReceived(bare, PREDICT_FRACTURED);
    expect(st.overlayControlsEnabled(withHeatmap)).toBe(true);
  });

  it("clamps the alpha slider to [0, 1]", () => {
    const s = st.initialState();
    expect(st.setOverlayAlpha(s, -0.3).overlayAlpha).toBe(0);
    expect(st.setOverlayAlpha(s, 1.7).overlayAlpha).toBe(1);
    expect(st.setOverlayAlpha(s, 0.25).overlayAlpha).toBe(0.25);
  });
});
