#pragma once

#include <memory>
#include <string>

#include "fashionrec/orchestrator.hpp"

namespace fashionrec {

// HTTP front end for the orchestrator:
//   POST /rpc                      JSON-RPC 2.0 (initialize, tools/list, tools/call)
//   POST /session                  {"user_id"?} -> {"id"}
//   POST /session/{id}/message     {"text", "images": [ref | data URL | {"base64", "ext"?}]}
//   GET  /session/{id}             transcript
//   GET  /users                    catalog user ids
//   GET  /image?ref=...            raw image bytes
class ChatServer {
 public:
  explicit ChatServer(Orchestrator& orchestrator);
  ~ChatServer();

  ChatServer(const ChatServer&) = delete;
  ChatServer& operator=(const ChatServer&) = delete;

  // Binds and serves until stop(). Port 0 picks a free port.
  void listen(const std::string& host, int port);
  // Binds without blocking; returns the bound port. Serve with run().
  int bind(const std::string& host, int port);
  void run();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Decodes one entry of a message "images" array into an image ref, storing
// uploads through the image store.
std::string decode_image_entry(const ImageStore& images, const Json& entry);

}  // namespace fashionrec
