//PVSCL:IFCOND(Replying)
function replyInThread (thread, reply) {
  thread.replies.push(reply)
  return thread
}
//PVSCL:ENDCOND
