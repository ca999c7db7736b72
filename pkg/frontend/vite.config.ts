import { defineConfig } from "vitest/config";

// `npm run dev` proxies /api to a locally running `edi serve`.
export default defineConfig({
  server: {
    proxy: {
      "/api": "http://127.0.0.1:8731",
    },
  },
  test: {
    environment: "node",
    include: ["tests/unit/**/*.test.ts"],
  },
});
