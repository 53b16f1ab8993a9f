/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_episode_free: (a: number, b: number) => void;
export const decay_curve: (a: number, b: number, c: number, d: number) => [number, number];
export const episode_arena_half: (a: number) => number;
export const episode_avg_residual_threat: (a: number) => number;
export const episode_bystanders: (a: number) => number;
export const episode_crt: (a: number) => number;
export const episode_frames: (a: number) => number;
export const episode_guards: (a: number) => number;
export const episode_positions: (a: number, b: number) => [number, number];
export const episode_residuals: (a: number, b: number) => [number, number];
export const episode_threat_field: (a: number, b: number, c: number) => [number, number];
export const episode_threat_trace: (a: number) => [number, number];
export const play: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
