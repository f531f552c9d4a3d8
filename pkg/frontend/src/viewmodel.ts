/**
 * Tile view models: one per placement returned by /layout, joined with
 * the camera list for phase badges, staleness and URL drafts.
 */

import type { CameraInfo, LayoutInfo, Phase } from "./api.js";

/** Vertical pixels taken by the label/entry/button row under each image. */
export const TILE_CHROME_PX = 76;
export const TILE_GAP_PX = 10;

export interface TileViewModel {
  cameraId: number;
  row: number;
  col: number;
  tileWidth: number;
  tileHeight: number;
  phase: Phase;
  stale: boolean;
  urlDraft: string;
  lastError: string | null;
}

export function buildTiles(
  layout: LayoutInfo,
  cameras: CameraInfo[],
  drafts: Map<number, string>,
): TileViewModel[] {
  const byId = new Map(cameras.map((camera) => [camera.camera_id, camera]));
  return layout.placements.map((placement) => {
    const camera = byId.get(placement.camera_id);
    return {
      cameraId: placement.camera_id,
      row: placement.row,
      col: placement.col,
      tileWidth: layout.tile_width,
      tileHeight: layout.tile_height,
      phase: camera?.phase ?? "idle",
      stale: camera?.stale ?? false,
      urlDraft:
        drafts.get(placement.camera_id) ?? camera?.saved_url ??
        camera?.publish_url ?? "",
      lastError: camera?.last_error ?? null,
    };
  });
}

export function tilePosition(tile: TileViewModel): { left: number; top: number } {
  return {
    left: tile.col * (tile.tileWidth + TILE_GAP_PX),
    top: tile.row * (tile.tileHeight + TILE_CHROME_PX + TILE_GAP_PX),
  };
}

/** Total pixel height of the grid content, for scroll sizing. */
export function gridContentHeight(layout: LayoutInfo): number {
  if (layout.rows === 0) return 0;
  return layout.rows * (layout.tile_height + TILE_CHROME_PX + TILE_GAP_PX);
}
