import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'jsdom',
    include: ['test/**/*.test.ts'],
    // the session test trains models and boots the real server
    testTimeout: 180_000,
    hookTimeout: 180_000,
  },
});
