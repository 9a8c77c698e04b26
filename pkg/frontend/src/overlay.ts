// Pure math for drawing the target box over a resized image. Kept free of
// DOM access so the scaling property is testable on its own.

export interface OverlayRect {
  left: number;
  top: number;
  width: number;
  height: number;
}

/**
 * CSS-pixel rectangle for a region given in natural image coordinates.
 *
 * Corners map to the same relative positions whatever the displayed size,
 * so a 2x resize lands every corner at exactly twice its old offset.
 */
export function overlayRect(
  region: readonly [number, number, number, number],
  naturalWidth: number,
  naturalHeight: number,
  displayedWidth: number,
  displayedHeight: number,
): OverlayRect {
  if (naturalWidth <= 0 || naturalHeight <= 0) {
    throw new Error('natural image size must be positive');
  }
  const sx = displayedWidth / naturalWidth;
  const sy = displayedHeight / naturalHeight;
  const [xTl, yTl, xBr, yBr] = region;
  return {
    left: xTl * sx,
    top: yTl * sy,
    width: (xBr - xTl) * sx,
    height: (yBr - yTl) * sy,
  };
}
