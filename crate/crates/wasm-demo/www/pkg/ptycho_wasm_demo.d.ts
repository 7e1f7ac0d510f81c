/* tslint:disable */
/* eslint-disable */

/**
 * A simulated bar-chart dataset and the running reconstruction of it.
 */
export class Session {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Phase of the estimate over the object region, after removing the
     * global constant that best maps it onto the truth.
     */
    estimate_rgba(): Uint8Array;
    /**
     * NRMSE (dB) after each iteration so far.
     */
    history(): Float64Array;
    /**
     * Side of the square images returned by the `*_rgba` methods.
     */
    image_px(): number;
    iteration(): number;
    /**
     * `msnr_db` ≤ 0 or NaN means noiseless.
     */
    constructor(rho: number, cpie: boolean, alpha_o: number, msnr_db: number, seed: bigint);
    positions(): number;
    rho_achieved(): number;
    /**
     * Runs `n` more iterations and returns the latest NRMSE in dB.
     */
    step(n: number): number;
    step_px(): number;
    truth_rgba(): Uint8Array;
}

/**
 * Geometry table for ρ in `[rho_min, rho_max]`, as CSV.
 */
export function geometry_csv(rho_min: number, rho_max: number, rho_step: number, probe_diameter_px: number): string;

/**
 * RGBA image of the probe on a `size²` grid: amplitude (left) and phase
 * (right), side by side.
 */
export function probe_rgba(defocus_um: number, alpha_mrad: number, size: number): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_session_free: (a: number, b: number) => void;
    readonly geometry_csv: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly probe_rgba: (a: number, b: number, c: number) => [number, number, number, number];
    readonly session_estimate_rgba: (a: number) => [number, number];
    readonly session_history: (a: number) => [number, number];
    readonly session_image_px: (a: number) => number;
    readonly session_iteration: (a: number) => number;
    readonly session_new: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
    readonly session_positions: (a: number) => number;
    readonly session_rho_achieved: (a: number) => number;
    readonly session_step: (a: number, b: number) => [number, number, number];
    readonly session_step_px: (a: number) => number;
    readonly session_truth_rgba: (a: number) => [number, number];
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
