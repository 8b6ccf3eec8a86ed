/** Single-session view state and its transitions. Pure functions: the DOM
 * layer renders whatever state says, so every invariant is testable without
 * a browser. */

import type { Prediction, PreprocessPanels } from "./api.js";

export interface ViewState {
  /** Object URL (or data URL) of the selected image, if any. */
  imageUrl: string | null;
  imageName: string | null;
  inFlight: boolean;
  prediction: Prediction | null;
  overlayVisible: boolean;
  /** 0..1; applied as the overlay's CSS opacity. */
  overlayAlpha: number;
  panels: PreprocessPanels | null;
  banner: string | null;
}

export function initialState(): ViewState {
  return {
    imageUrl: null,
    imageName: null,
    inFlight: false,
    prediction: null,
    overlayVisible: true,
    overlayAlpha: 0.5,
    panels: null,
    banner: null,
  };
}

export function selectImage(s: ViewState, url: string, name: string): ViewState {
  return { ...s, imageUrl: url, imageName: name, banner: null };
}

/** Returns null when a request is already running (at most one in flight). */
export function beginRequest(s: ViewState): ViewState | null {
  if (s.inFlight) return null;
  return { ...s, inFlight: true, banner: null };
}

export function predictionReceived(s: ViewState, p: Prediction): ViewState {
  return { ...s, inFlight: false, prediction: p, banner: null };
}

export function panelsReceived(s: ViewState, p: PreprocessPanels): ViewState {
  return { ...s, inFlight: false, panels: p, banner: null };
}

/** Any failure: show the banner and drop results that no longer correspond
 * to a successful request, so a stale prediction can never sit under an
 * error message. */
export function requestFailed(s: ViewState, message: string): ViewState {
  return { ...s, inFlight: false, prediction: null, panels: null, banner: message };
}

export function setOverlayVisible(s: ViewState, visible: boolean): ViewState {
  return { ...s, overlayVisible: visible };
}

export function setOverlayAlpha(s: ViewState, alpha: number): ViewState {
  return { ...s, overlayAlpha: Math.min(1, Math.max(0, alpha)) };
}

/** Overlay controls only make sense once a heatmap exists. */
export function overlayControlsEnabled(s: ViewState): boolean {
  return s.prediction?.heatmap != null;
}
