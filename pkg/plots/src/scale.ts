/** Axis scales for the figure family: linear, log10 and log2. */

export interface Scale {
  (value: number): number;
  ticks(): Array<{ value: number; label: string }>;
}

export function linearScale(
  domain: [number, number],
  range: [number, number],
  tickCount = 5,
): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const fn = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  fn.ticks = () => {
    const step = span / tickCount;
    return Array.from({ length: tickCount + 1 }, (_, i) => {
      const value = d0 + i * step;
      return { value, label: value.toPrecision(3) };
    });
  };
  return fn;
}

export function log10Scale(domain: [number, number], range: [number, number]): Scale {
  const lo = Math.log10(domain[0]);
  const hi = Math.log10(domain[1]);
  const base = linearScale([lo, hi], range);
  const fn = ((v: number) => base(Math.log10(v))) as Scale;
  fn.ticks = () => {
    const out: Array<{ value: number; label: string }> = [];
    for (let e = Math.ceil(lo - 1e-9); e <= Math.floor(hi + 1e-9); e += 1) {
      out.push({ value: 10 ** e, label: `1e${e}` });
    }
    if (out.length < 2) {
      out.length = 0;
      out.push({ value: domain[0], label: domain[0].toExponential(1) });
      out.push({ value: domain[1], label: domain[1].toExponential(1) });
    }
    return out;
  };
  return fn;
}

export function log2Scale(domain: [number, number], range: [number, number]): Scale {
  const lo = Math.log2(domain[0]);
  const hi = Math.log2(domain[1]);
  const base = linearScale([lo, hi], range);
  const fn = ((v: number) => base(Math.log2(v))) as Scale;
  fn.ticks = () => {
    const out: Array<{ value: number; label: string }> = [];
    for (let e = Math.ceil(lo - 1e-9); e <= Math.floor(hi + 1e-9); e += 1) {
      out.push({ value: 2 ** e, label: `2^${e}` });
    }
    return out;
  };
  return fn;
}

export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) {
    throw new Error("cannot take the extent of an empty or non-finite series");
  }
  if (lo === hi) {
    return [lo * 0.9 || -1, hi * 1.1 || 1];
  }
  return [lo, hi];
}
