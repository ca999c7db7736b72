import { defineConfig } from "vitest/config";

// End-to-end run against a real `edi serve` process; the suite generates its
// own bundles and spawns the servers, so startup dominates the timeouts.
export default defineConfig({
  test: {
    environment: "node",
    include: ["tests/e2e/**/*.test.ts"],
    fileParallelism: false,
    testTimeout: 120_000,
    hookTimeout: 180_000,
  },
});
