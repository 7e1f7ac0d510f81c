/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_session_free: (a: number, b: number) => void;
export const geometry_csv: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const probe_rgba: (a: number, b: number, c: number) => [number, number, number, number];
export const session_estimate_rgba: (a: number) => [number, number];
export const session_history: (a: number) => [number, number];
export const session_image_px: (a: number) => number;
export const session_iteration: (a: number) => number;
export const session_new: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
export const session_positions: (a: number) => number;
export const session_rho_achieved: (a: number) => number;
export const session_step: (a: number, b: number) => [number, number, number];
export const session_step_px: (a: number) => number;
export const session_truth_rgba: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
