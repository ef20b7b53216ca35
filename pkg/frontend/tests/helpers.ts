import { readFileSync } from "node:fs";
import net from "node:net";
import path from "node:path";
import { fileURLToPath } from "node:url";

import { decodeLine, encodeLine, type Message, type ProtocolSchema } from "../src/protocol.js";
import type { Transport } from "../src/transport.js";

const here = path.dirname(fileURLToPath(import.meta.url));

export function loadSharedSchema(): ProtocolSchema {
  const schemaPath = path.resolve(here, "../../src/luscan/data/protocol_schema.json");
  return JSON.parse(readFileSync(schemaPath, "utf-8")) as ProtocolSchema;
}

// Raw TCP line transport speaking the reference newline-delimited JSON wire;
// node-only, used by the live-loop test.
export class TcpNdjsonTransport implements Transport {
  private sock: net.Socket;
  private buffer = "";
  private messageHandler: ((msg: Message) => void) | null = null;
  private closeHandler: (() => void) | null = null;
  connected = false;

  constructor(host: string, port: number, onOpen: () => void) {
    this.sock = net.createConnection({ host, port }, () => {
      this.connected = true;
      onOpen();
    });
    this.sock.on("data", (chunk: Buffer) => {
      this.buffer += chunk.toString("utf-8");
      let idx;
      while ((idx = this.buffer.indexOf("\n")) >= 0) {
        const line = this.buffer.slice(0, idx);
        this.buffer = this.buffer.slice(idx + 1);
        if (line.trim() && this.messageHandler) {
          this.messageHandler(decodeLine(line));
        }
      }
    });
    this.sock.on("close", () => {
      this.connected = false;
      this.closeHandler?.();
    });
    this.sock.on("error", () => undefined);
  }

  send(msg: Message): void {
    this.sock.write(encodeLine(msg));
  }

  onMessage(handler: (msg: Message) => void): void {
    this.messageHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }

  close(): void {
    this.sock.destroy();
  }
}

export function waitFor(predicate: () => boolean, timeoutMs: number,
                        label: string): Promise<void> {
  const started = Date.now();
  return new Promise((resolve, reject) => {
    const poll = () => {
      if (predicate()) return resolve();
      if (Date.now() - started > timeoutMs) {
        return reject(new Error(`timeout waiting for ${label}`));
      }
      setTimeout(poll, 20);
    };
    poll();
  });
}
