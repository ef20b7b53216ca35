// Message transport abstraction: the browser uses a WebSocket carrying one
// JSON message per ws text frame; tests substitute a fake or a raw TCP
// line client.  Either way the schema on the wire is identical.

import type { Message } from "./protocol.js";
import { decodeLine, encodeLine } from "./protocol.js";

export interface Transport {
  send(msg: Message): void;
  onMessage(handler: (msg: Message) => void): void;
  onClose(handler: () => void): void;
  close(): void;
  readonly connected: boolean;
}

export class WebSocketTransport implements Transport {
  private readonly sock: WebSocket;
  private messageHandler: ((msg: Message) => void) | null = null;
  private closeHandler: (() => void) | null = null;
  connected = false;

  constructor(url: string, onOpen?: () => void) {
    this.sock = new WebSocket(url);
    this.sock.onopen = () => {
      this.connected = true;
      onOpen?.();
    };
    this.sock.onmessage = (ev: MessageEvent) => {
      if (typeof ev.data === "string" && this.messageHandler) {
        this.messageHandler(decodeLine(ev.data));
      }
    };
    this.sock.onclose = () => {
      this.connected = false;
      this.closeHandler?.();
    };
  }

  send(msg: Message): void {
    if (this.sock.readyState === 1) {
      this.sock.send(encodeLine(msg).trimEnd());
    }
  }

  onMessage(handler: (msg: Message) => void): void {
    this.messageHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }

  close(): void {
    this.sock.close();
  }
}

export class FakeTransport implements Transport {
  sent: Message[] = [];
  connected = true;
  private messageHandler: ((msg: Message) => void) | null = null;
  private closeHandler: (() => void) | null = null;

  send(msg: Message): void {
    if (!this.connected) throw new Error("transport closed");
    this.sent.push(msg);
  }

  onMessage(handler: (msg: Message) => void): void {
    this.messageHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }

  deliver(msg: Message): void {
    this.messageHandler?.(msg);
  }

  dropConnection(): void {
    this.connected = false;
    this.closeHandler?.();
  }

  close(): void {
    this.connected = false;
  }
}
