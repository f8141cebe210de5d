/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_series_free: (a: number, b: number) => void;
export const plume_centerline: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const plume_field: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const run_scenario: (a: number, b: number, c: number) => [number, number, number];
export const series_aggregate: (a: number, b: number) => [number, number];
export const series_coop_fraction: (a: number, b: number) => [number, number];
export const series_goals: (a: number) => [number, number];
export const series_hours_per_step: (a: number) => number;
export const series_steps: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
