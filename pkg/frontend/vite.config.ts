import { defineConfig } from "vite";

const api = "http://127.0.0.1:8765";

export default defineConfig({
  build: { outDir: "dist" },
  server: {
    proxy: {
      "/session": api,
      "/frames": api,
      "/annotations": api,
      "/playback": api,
    },
  },
  test: {
    environment: "node",
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
