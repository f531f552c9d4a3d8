import { describe, expect, it } from "vitest";

import type { CameraInfo, LayoutInfo } from "../src/api.js";
import {
  buildTiles,
  gridContentHeight,
  TILE_CHROME_PX,
  TILE_GAP_PX,
  tilePosition,
} from "../src/viewmodel.js";

function layoutFor(n: number, maxColumns = 3, tileWidth = 576,
                   tileHeight = 432): LayoutInfo {
  const placements = [];
  for (let i = 0; i < n; i++) {
    placements.push({
      camera_id: i,
      row: Math.floor(i / maxColumns),
      col: i % maxColumns,
    });
  }
  return {
    tile_width: tileWidth,
    tile_height: tileHeight,
    rows: Math.ceil(n / maxColumns),
    max_columns: maxColumns,
    placements,
  };
}

function camera(id: number, extra: Partial<CameraInfo> = {}): CameraInfo {
  return {
    camera_id: id,
    device_name: `virtual:${id}`,
    stale: false,
    saved_url: null,
    phase: "idle",
    publish_url: null,
    last_error: null,
    ...extra,
  };
}

describe("buildTiles", () => {
  it("creates one tile per placement in a 3+1 arrangement", () => {
    const tiles = buildTiles(layoutFor(4), [0, 1, 2, 3].map((i) => camera(i)),
      new Map());
    expect(tiles).toHaveLength(4);
    expect(tiles.map((t) => [t.row, t.col])).toEqual(
      [[0, 0], [0, 1], [0, 2], [1, 0]]);
  });

  it("returns a single full-width tile for one camera", () => {
    const tiles = buildTiles(layoutFor(1, 3, 1728, 1296), [camera(0)],
      new Map());
    expect(tiles).toHaveLength(1);
    expect(tiles[0].tileWidth).toBe(1728);
    expect(tiles[0].row).toBe(0);
    expect(tiles[0].col).toBe(0);
  });

  it("returns no tiles for an empty layout", () => {
    expect(buildTiles(layoutFor(0), [], new Map())).toEqual([]);
  });

  it("badges match camera phase and staleness", () => {
    const tiles = buildTiles(layoutFor(2), [
      camera(0, { phase: "streaming", publish_url: "udp://127.0.0.1:6668" }),
      camera(1, { stale: true }),
    ], new Map());
    expect(tiles[0].phase).toBe("streaming");
    expect(tiles[1].stale).toBe(true);
  });

  it("prefers the live draft, then the saved URL", () => {
    const cameras = [camera(0, { saved_url: "udp://127.0.0.1:6668" })];
    const fromSaved = buildTiles(layoutFor(1), cameras, new Map());
    expect(fromSaved[0].urlDraft).toBe("udp://127.0.0.1:6668");
    const drafts = new Map([[0, "tcp://127.0.0.1:6699"]]);
    const fromDraft = buildTiles(layoutFor(1), cameras, drafts);
    expect(fromDraft[0].urlDraft).toBe("tcp://127.0.0.1:6699");
  });
});

describe("tilePosition", () => {
  it("positions tiles by row and column with gap and chrome", () => {
    const tiles = buildTiles(layoutFor(4), [0, 1, 2, 3].map((i) => camera(i)),
      new Map());
    expect(tilePosition(tiles[0])).toEqual({ left: 0, top: 0 });
    expect(tilePosition(tiles[1]).left).toBe(576 + TILE_GAP_PX);
    expect(tilePosition(tiles[3])).toEqual({
      left: 0,
      top: 432 + TILE_CHROME_PX + TILE_GAP_PX,
    });
  });
});

describe("gridContentHeight", () => {
  it("is zero for no rows and scales with rows", () => {
    expect(gridContentHeight(layoutFor(0))).toBe(0);
    expect(gridContentHeight(layoutFor(4))).toBe(
      2 * (432 + TILE_CHROME_PX + TILE_GAP_PX));
  });
});
