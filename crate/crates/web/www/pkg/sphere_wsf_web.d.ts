/* tslint:disable */
/* eslint-disable */

/**
 * Noisy samples of the six-bump test function together with the
 * factorized weighted system and a lat/lon evaluation grid.
 */
export class Scene {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * 2-norm condition number of the filtered system.
     */
    condition_number(name: string, ratio: number): number;
    /**
     * Filtered fit with parameter `ratio·κ`. Returns the grid values followed
     * by the grid RMSE against the noise-free function.
     */
    fit(name: string, ratio: number): Float64Array;
    height(): number;
    /**
     * Largest eigenvalue κ of the weighted kernel matrix.
     */
    kappa(): number;
    /**
     * `n` random training points with noise level `delta`, plus `n/2`
     * validation points; the heat map is `width × height`.
     */
    constructor(n: number, delta: number, seed: number, width: number, height: number);
    /**
     * RMSE of the noisy training values against the clean ones.
     */
    noise_rmse(): number;
    /**
     * Exactness degree of the training quadrature.
     */
    quadrature_degree(): number;
    /**
     * Training points as `x, y, z, value` quadruples.
     */
    samples(): Float64Array;
    /**
     * Ratio chosen by weighted validation over `{1, 1/2, …, 1/⌈√n⌉}`.
     */
    select(name: string): number;
    /**
     * The noise-free function on the heat-map grid, row-major from the north.
     */
    truth(): Float64Array;
    width(): number;
}

/**
 * `g_λ(σ)σ` on `samples` log-spaced σ in `[κ·1e-4, κ]` with κ = 1, where λ
 * is `ratio` for Tikhonov and cut-off and `l = round(1/ratio)` for Landweber.
 * Returns the σ values followed by the responses.
 */
export function filter_response(name: string, ratio: number, samples: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_scene_free: (a: number, b: number) => void;
    readonly filter_response: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly scene_condition_number: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly scene_fit: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly scene_height: (a: number) => number;
    readonly scene_kappa: (a: number) => number;
    readonly scene_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly scene_noise_rmse: (a: number) => number;
    readonly scene_quadrature_degree: (a: number) => number;
    readonly scene_samples: (a: number) => [number, number];
    readonly scene_select: (a: number, b: number, c: number) => [number, number, number];
    readonly scene_truth: (a: number) => [number, number];
    readonly scene_width: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
