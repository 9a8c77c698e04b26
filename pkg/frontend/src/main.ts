import { Client } from './api.js';
import { mountApp } from './app.js';

const root = document.getElementById('app');
if (root === null) {
  throw new Error('index.html must provide <div id="app">');
}
mountApp(root, new Client());
