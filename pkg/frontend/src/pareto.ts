/** Non-dominated frontier over (recall, qps), both maximized. */

export interface ParetoPoint {
  recall: number;
  qps: number;
}

/**
 * Keep points not dominated by any other (another point at least as good on
 * both axes and strictly better on one). Output sorted by ascending recall.
 */
export function paretoFront<T extends ParetoPoint>(points: T[]): T[] {
  const kept = points.filter(
    (p) =>
      !points.some(
        (q) =>
          q !== p &&
          q.recall >= p.recall &&
          q.qps >= p.qps &&
          (q.recall > p.recall || q.qps > p.qps),
      ),
  );
  return [...kept].sort((a, b) => a.recall - b.recall || a.qps - b.qps);
}
