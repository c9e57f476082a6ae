/** The service's default heatmap gradient, mirrored so streamline and
 * particle coloring match the slice panel exactly. */

export type Rgb = [number, number, number];

const STOPS: [number, Rgb][] = [
  [0.0, [68, 1, 84]],
  [0.25, [59, 82, 139]],
  [0.5, [33, 145, 140]],
  [0.75, [94, 201, 98]],
  [1.0, [253, 231, 37]],
];

export function gradientLookup(t: number): Rgb {
  const x = Math.min(1, Math.max(0, t));
  for (let i = 1; i < STOPS.length; i++) {
    const [t1, c1] = STOPS[i];
    if (x <= t1) {
      const [t0, c0] = STOPS[i - 1];
      const f = (x - t0) / (t1 - t0);
      return [
        Math.floor(c0[0] + f * (c1[0] - c0[0]) + 0.5),
        Math.floor(c0[1] + f * (c1[1] - c0[1]) + 0.5),
        Math.floor(c0[2] + f * (c1[2] - c0[2]) + 0.5),
      ];
    }
  }
  return STOPS[STOPS.length - 1][1];
}

/** Normalized [0,1] color ramp for vertex color buffers. */
export function colorize(values: ArrayLike<number>, vmin: number, vmax: number): Float32Array {
  const out = new Float32Array(values.length * 3);
  const span = vmax > vmin ? vmax - vmin : 1;
  for (let i = 0; i < values.length; i++) {
    const [r, g, b] = gradientLookup((values[i] - vmin) / span);
    out[3 * i] = r / 255;
    out[3 * i + 1] = g / 255;
    out[3 * i + 2] = b / 255;
  }
  return out;
}
