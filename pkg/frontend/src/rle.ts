// Run-length mask decoding: alternating run lengths, zeros first.

export function rleDecode(runs: number[], size: number): boolean[] {
  const out = new Array<boolean>(size).fill(false);
  let pos = 0;
  let value = false;
  for (const run of runs) {
    if (value) {
      for (let i = pos; i < pos + run; i++) out[i] = true;
    }
    pos += run;
    value = !value;
  }
  if (pos !== size) {
    throw new Error(`run lengths sum to ${pos}, expected ${size}`);
  }
  return out;
}
