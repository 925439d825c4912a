// Number rendering. Plan figures are shown exactly as the service sent them
// (no client-side rounding or recomputation); bar labels use fixed decimals.

export function raw(value: number | null | undefined): string {
  if (value === null || value === undefined) return "—";
  return String(value);
}

export function rawWithUnit(value: number | null | undefined, unit: string): string {
  if (value === null || value === undefined) return "—";
  return `${String(value)} ${unit}`;
}

export function fixed(value: number | null | undefined, digits = 2): string {
  if (value === null || value === undefined) return "—";
  return value.toFixed(digits);
}
