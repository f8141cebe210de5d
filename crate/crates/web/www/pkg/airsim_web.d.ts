/* tslint:disable */
/* eslint-disable */

/**
 * Per-step domain aggregates and cooperation shares of one scenario run.
 */
export class Series {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Aggregate of species 0 (PM10), 1 (NOx) or 2 (SOx); empty for other indices.
     */
    aggregate(species: number): Float64Array;
    coop_fraction(species: number): Float64Array;
    /**
     * Goal levels in species order PM10, NOx, SOx.
     */
    readonly goals: Float64Array;
    readonly hours_per_step: number;
    readonly steps: number;
}

export function plume_centerline(stack_height: number, emission_rate: number, wind_speed: number, length: number, n: number): Float64Array;

export function plume_field(stack_height: number, emission_rate: number, wind_speed: number, length: number, halfwidth: number, nx: number, ny: number): Float64Array;

export function run_scenario(seed: number, cooperation: boolean, leaks: boolean): Series;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_series_free: (a: number, b: number) => void;
    readonly plume_centerline: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly plume_field: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly run_scenario: (a: number, b: number, c: number) => [number, number, number];
    readonly series_aggregate: (a: number, b: number) => [number, number];
    readonly series_coop_fraction: (a: number, b: number) => [number, number];
    readonly series_goals: (a: number) => [number, number];
    readonly series_hours_per_step: (a: number) => number;
    readonly series_steps: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
