/**
 * Group-relative advantage normalization, reimplemented client-side for
 * demonstration: A_i = (r_i - mean) / max(populationStd, eps).
 */

export class DegenerateGroupError extends Error {
  constructor(size: number) {
    super(`group size must be >= 2, got ${size}`);
    this.name = 'DegenerateGroupError';
  }
}

export function groupAdvantages(rewards: number[], stdEpsilon = 1e-8): number[] {
  const g = rewards.length;
  if (g < 2) {
    throw new DegenerateGroupError(g);
  }
  const mean = rewards.reduce((a, b) => a + b, 0) / g;
  const variance = rewards.reduce((acc, r) => acc + (r - mean) ** 2, 0) / g;
  const denom = Math.max(Math.sqrt(variance), stdEpsilon);
  return rewards.map((r) => (r - mean) / denom);
}
