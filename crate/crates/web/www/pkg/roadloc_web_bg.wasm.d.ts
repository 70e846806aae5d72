/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_libevimage_free: (a: number, b: number) => void;
export const libev_image: (a: number, b: bigint, c: number) => [number, number, number];
export const libevimage_height: (a: number) => number;
export const libevimage_instances: (a: number) => number;
export const libevimage_rgba: (a: number) => [number, number];
export const libevimage_width: (a: number) => number;
export const registration_demo: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number, number];
export const threshold_trace: (a: bigint, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
