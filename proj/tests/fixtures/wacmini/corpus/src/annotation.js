// Annotation model shared by the browser extension
//PVSCL:IFCOND(AnnotationServer)
class Annotation {
  constructor (AnnotationType, Annot_Flag) {
    this.AnnotationType = AnnotationType
    this.Annot_Flag = Annot_Flag
  }
}
const AnnotationType = { Highlighting: 'highlighting', Commenting: 'commenting' }
const Annot_Flag = { Pending: 0, Stored: 1 }
//PVSCL:ENDCOND
//PVSCL:IFCOND(Operation)
function updateAnnotation (Annotation, AnnotationType, Annot_Flag) {
  Annotation.AnnotationType = AnnotationType
  Annotation.Annot_Flag = Annot_Flag
  //PVSCL:IFCOND(Commenting)
  remark = composeRemark(remark)
  //PVSCL:ENDCOND
  return Annotation
}
//PVSCL:ENDCOND
