/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_scene_free: (a: number, b: number) => void;
export const filter_response: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const scene_condition_number: (a: number, b: number, c: number, d: number) => [number, number, number];
export const scene_fit: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const scene_height: (a: number) => number;
export const scene_kappa: (a: number) => number;
export const scene_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const scene_noise_rmse: (a: number) => number;
export const scene_quadrature_degree: (a: number) => number;
export const scene_samples: (a: number) => [number, number];
export const scene_select: (a: number, b: number, c: number) => [number, number, number];
export const scene_truth: (a: number) => [number, number];
export const scene_width: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
