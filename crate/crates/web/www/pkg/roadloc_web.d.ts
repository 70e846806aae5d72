/* tslint:disable */
/* eslint-disable */

/**
 * RGBA image of the LiBEV raster.
 */
export class LibevImage {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    rgba(): Uint8Array;
    readonly height: number;
    readonly instances: number;
    readonly width: number;
}

export function libev_image(frames: number, seed: bigint, wet_road: boolean): LibevImage;

/**
 * Registration result as JSON.
 */
export function registration_demo(solver: string, epsilon_lines: number, dx: number, dy: number, dyaw_deg: number, seed: bigint): string;

/**
 * Kalman threshold trace as JSON `{measurement, rho}`.
 */
export function threshold_trace(seed: bigint, frames: number, q: number, r: number, marking_fraction: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_libevimage_free: (a: number, b: number) => void;
    readonly libev_image: (a: number, b: bigint, c: number) => [number, number, number];
    readonly libevimage_height: (a: number) => number;
    readonly libevimage_instances: (a: number) => number;
    readonly libevimage_rgba: (a: number) => [number, number];
    readonly libevimage_width: (a: number) => number;
    readonly registration_demo: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number, number];
    readonly threshold_trace: (a: bigint, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
