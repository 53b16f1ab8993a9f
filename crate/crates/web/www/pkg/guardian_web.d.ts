/* tslint:disable */
/* eslint-disable */

/**
 * One simulated episode, kept frame by frame for playback.
 */
export class Episode {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    arena_half(): number;
    avg_residual_threat(): number;
    bystanders(): number;
    crt(): number;
    /**
     * Number of frames, the initial state included.
     */
    frames(): number;
    guards(): number;
    /**
     * Flat `x, y` pairs: VIP, then guards, then bystanders.
     */
    positions(frame: number): Float64Array;
    /**
     * Residual threat of each bystander at `frame`.
     */
    residuals(frame: number): Float64Array;
    /**
     * Threat a bystander standing at each cell of a `resolution²` grid
     * would pose, given the guards at `frame`. Row 0 is the top edge.
     */
    threat_field(frame: number, resolution: number): Float64Array;
    /**
     * Combined threat of every frame.
     */
    threat_trace(): Float64Array;
}

/**
 * Base threat sampled at `samples` evenly spaced distances in `[0, max_distance]`.
 */
export function decay_curve(kappa: number, d_safe: number, samples: number, max_distance: number): Float64Array;

/**
 * Plays an episode for the page.
 */
export function play(scenario: string, policy: string, seed: number, kappa: number, d_safe: number, bystanders: number): Episode;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_episode_free: (a: number, b: number) => void;
    readonly decay_curve: (a: number, b: number, c: number, d: number) => [number, number];
    readonly episode_arena_half: (a: number) => number;
    readonly episode_avg_residual_threat: (a: number) => number;
    readonly episode_bystanders: (a: number) => number;
    readonly episode_crt: (a: number) => number;
    readonly episode_frames: (a: number) => number;
    readonly episode_guards: (a: number) => number;
    readonly episode_positions: (a: number, b: number) => [number, number];
    readonly episode_residuals: (a: number, b: number) => [number, number];
    readonly episode_threat_field: (a: number, b: number, c: number) => [number, number];
    readonly episode_threat_trace: (a: number) => [number, number];
    readonly play: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
