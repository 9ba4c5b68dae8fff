import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    // the live suite spawns a real service and trains models first
    testTimeout: 30_000,
    hookTimeout: 180_000,
    fileParallelism: false,
  },
});
