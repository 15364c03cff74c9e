import { defineConfig } from "vitest/config";

// Keep in sync with UI_PORT in tests/ui.test.ts: the emulated page shares the
// service's origin, mirroring how the API serves the built assets.
const UI_PORT = 18731;

export default defineConfig({
  test: {
    environment: "happy-dom",
    environmentOptions: {
      happyDOM: {
        url: `http://127.0.0.1:${UI_PORT}/`,
      },
    },
    include: ["tests/**/*.test.ts"],
    testTimeout: 30_000,
    hookTimeout: 60_000,
  },
});
